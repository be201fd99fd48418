#include "deltaforge/sweep.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>

#include "deltaforge/editors.hpp"
#include "deltaforge/riemann.hpp"

namespace deltaforge::sweep {

using nlohmann::json;

namespace {

Experiment parse_experiment(const std::string & name) {
    if (name == "dare_grid") {
        return Experiment::DareGrid;
    }
    if (name == "bitdelta_bits") {
        return Experiment::BitdeltaBits;
    }
    if (name == "bitdelta_scale") {
        return Experiment::BitdeltaScale;
    }
    if (name == "expo_alpha") {
        return Experiment::ExpoAlpha;
    }
    if (name == "ties_fraction") {
        return Experiment::TiesFraction;
    }
    if (name == "svd_rank") {
        return Experiment::SvdRank;
    }
    if (name == "biased_ablation") {
        return Experiment::BiasedAblation;
    }
    throw Error(ErrorKind::InvalidConfig, "unknown experiment '" + name + "'");
}

const char * experiment_name(Experiment e) {
    switch (e) {
        case Experiment::DareGrid: return "dare_grid";
        case Experiment::BitdeltaBits: return "bitdelta_bits";
        case Experiment::BitdeltaScale: return "bitdelta_scale";
        case Experiment::ExpoAlpha: return "expo_alpha";
        case Experiment::TiesFraction: return "ties_fraction";
        case Experiment::SvdRank: return "svd_rank";
        case Experiment::BiasedAblation: return "biased_ablation";
    }
    return "dare_grid";
}

DatasetConfig parse_dataset(const json & j, uint64_t default_seed) {
    DatasetConfig config;
    config.seed = default_seed;
    if (j.is_null()) {
        return config;
    }
    if (!j.is_object()) {
        throw Error(ErrorKind::InvalidConfig, "dataset config must be an object");
    }
    config.n_samples = j.value("n_samples", config.n_samples);
    config.shift = j.value("shift", config.shift);
    config.seed = j.value("seed", config.seed);
    return config;
}

template <typename T> std::vector<T> list_of(const json & grid, const char * key) {
    if (!grid.contains(key)) {
        return {};
    }
    if (!grid[key].is_array()) {
        throw Error(ErrorKind::InvalidConfig, std::string("grid '") + key + "' must be an array");
    }
    return grid[key].get<std::vector<T>>();
}

// One operator application per grid point; seeded points get the row seed.
using GridPoint = std::function<editors::EditOutcome(const DeltaSet &, uint64_t)>;

std::vector<GridPoint> build_grid(const SweepConfig & config, const NamedTensorMap & gradient) {
    const json & grid = config.grid;
    std::vector<GridPoint> points;
    switch (config.experiment) {
        case Experiment::DareGrid: {
            const auto ps = list_of<double>(grid, "p");
            auto ks = list_of<double>(grid, "k");
            if (ks.empty()) {
                ks.push_back(0.0);
            }
            for (double p : ps) {
                for (double k : ks) {
                    points.push_back([p, k](const DeltaSet & delta, uint64_t seed) {
                        return editors::drop_rescale(delta, p, k, seed);
                    });
                }
            }
            break;
        }
        case Experiment::BitdeltaBits: {
            const bool signed_mean = grid.value("signed_mean", false);
            for (size_t bits : list_of<size_t>(grid, "bits")) {
                const size_t blocks = size_t(1) << bits;
                points.push_back([blocks, signed_mean](const DeltaSet & delta, uint64_t) {
                    return editors::multibit(delta, blocks, signed_mean);
                });
            }
            for (size_t blocks : list_of<size_t>(grid, "blocks")) {
                points.push_back([blocks, signed_mean](const DeltaSet & delta, uint64_t) {
                    return editors::multibit(delta, blocks, signed_mean);
                });
            }
            break;
        }
        case Experiment::BitdeltaScale: {
            for (double factor : list_of<double>(grid, "factor")) {
                points.push_back([factor](const DeltaSet & delta, uint64_t) {
                    return editors::bitdelta_perturbed_scale(delta, factor);
                });
            }
            std::vector<std::string> dists;
            if (grid.contains("dist")) {
                if (grid["dist"].is_string()) {
                    dists.push_back(grid["dist"].get<std::string>());
                } else {
                    dists = list_of<std::string>(grid, "dist");
                }
            } else if (grid.contains("spread")) {
                dists.push_back("normal");
            }
            for (const std::string & dist : dists) {
                if (dist != "normal" && dist != "uniform") {
                    throw Error(ErrorKind::InvalidConfig, "unknown distribution '" + dist + "'");
                }
                const auto d = dist == "normal" ? editors::ScaleDist::Normal
                                                : editors::ScaleDist::Uniform;
                for (double spread : list_of<double>(grid, "spread")) {
                    points.push_back([d, spread](const DeltaSet & delta, uint64_t seed) {
                        return editors::bitdelta_sampled_scale(delta, d, spread, seed);
                    });
                }
            }
            break;
        }
        case Experiment::ExpoAlpha: {
            const bool allow_any = grid.value("allow_any_alpha", false);
            for (double alpha : list_of<double>(grid, "alpha")) {
                points.push_back([alpha, allow_any](const DeltaSet & delta, uint64_t) {
                    return editors::expo(delta, alpha, allow_any);
                });
            }
            break;
        }
        case Experiment::TiesFraction: {
            for (double keep : list_of<double>(grid, "keep")) {
                points.push_back([keep](const DeltaSet & delta, uint64_t) {
                    return editors::ties_prune(delta, keep);
                });
            }
            break;
        }
        case Experiment::SvdRank: {
            for (size_t rank : list_of<size_t>(grid, "rank")) {
                points.push_back([rank](const DeltaSet & delta, uint64_t) {
                    return editors::svd_truncate(delta, rank);
                });
            }
            break;
        }
        case Experiment::BiasedAblation: {
            const auto ps = list_of<double>(grid, "p");
            const auto ks = list_of<double>(grid, "k");
            auto biases = list_of<std::string>(grid, "bias");
            if (biases.empty()) {
                biases.push_back("delta");
            }
            for (double p : ps) {
                for (double k : ks) {
                    for (const std::string & bias : biases) {
                        if (bias != "delta" && bias != "product") {
                            throw Error(ErrorKind::InvalidConfig, "unknown bias '" + bias + "'");
                        }
                        const auto on = bias == "product" ? editors::BiasOn::ProductSign
                                                          : editors::BiasOn::DeltaSign;
                        points.push_back([p, k, on, &gradient](const DeltaSet & delta, uint64_t) {
                            return editors::sign_biased_scale(delta, p, k, on, &gradient);
                        });
                    }
                }
            }
            break;
        }
    }
    if (points.empty()) {
        throw Error(ErrorKind::InvalidConfig, "experiment grid resolves to no points");
    }
    return points;
}

} // namespace

SweepConfig SweepConfig::from_json(const json & j) {
    if (!j.is_object()) {
        throw Error(ErrorKind::InvalidConfig, "sweep config must be a JSON object");
    }
    SweepConfig config;
    if (!j.contains("probe")) {
        throw Error(ErrorKind::InvalidConfig, "sweep config needs a 'probe' spec");
    }
    config.probe = probe::ProbeSpec::from_json(j["probe"]);
    config.base_data = parse_dataset(j.value("base_dataset", json(nullptr)), 1);
    config.finetune_data = parse_dataset(j.value("finetune_dataset", json(nullptr)), 2);
    if (j.contains("training")) {
        const json & t = j["training"];
        config.training.steps_base = t.value("steps_base", config.training.steps_base);
        config.training.steps_finetune = t.value("steps_finetune", config.training.steps_finetune);
        config.training.learning_rate = t.value("learning_rate", config.training.learning_rate);
    }
    if (!j.contains("experiment") || !j["experiment"].is_string()) {
        throw Error(ErrorKind::InvalidConfig, "sweep config needs an 'experiment' name");
    }
    config.experiment = parse_experiment(j["experiment"].get<std::string>());
    config.grid = j.value("grid", json::object());
    if (!config.grid.is_object() || config.grid.empty()) {
        throw Error(ErrorKind::InvalidConfig, "sweep config needs a non-empty 'grid' object");
    }
    config.seeds = j.value("seeds", std::vector<uint64_t>{0});
    if (config.seeds.empty()) {
        throw Error(ErrorKind::InvalidConfig, "seed list is empty");
    }
    if (j.contains("estimator")) {
        const json & e = j["estimator"];
        config.estimator_C = e.value("C", config.estimator_C);
        config.include_left_endpoint =
            e.value("include_left_endpoint", config.include_left_endpoint);
    }
    if (j.contains("selection")) {
        config.selection = TensorSelection::parse(j["selection"].get<std::string>());
    }
    return config;
}

std::vector<SweepRow> run_sweep(const SweepConfig & config) {
    const probe::ProbeDataset base = generate_dataset(
        config.probe, config.base_data.n_samples, config.base_data.shift, config.base_data.seed);
    const probe::ProbeDataset finetune =
        generate_dataset(config.probe, config.finetune_data.n_samples, config.finetune_data.shift,
                         config.finetune_data.seed);
    const probe::TrainRecord record = simulate_post_training(
        config.probe, base, finetune, config.training.steps_base, config.training.steps_finetune,
        config.training.learning_rate);
    const DeltaSet delta = compute_delta(record.w_post, record.w_pre, config.selection);
    const NamedTensorMap gradient = probe::grad(config.probe, record.w_post, finetune);

    const std::vector<GridPoint> points = build_grid(config, gradient);
    std::vector<SweepRow> rows;
    rows.reserve(points.size() * config.seeds.size());
    for (const GridPoint & point : points) {
        for (uint64_t seed : config.seeds) {
            const editors::EditOutcome outcome = point(delta, seed);
            SweepRow row;
            row.experiment = experiment_name(config.experiment);
            row.op = outcome.op_record["op"].get<std::string>();
            row.params = outcome.op_record["params"];
            row.seed = seed;
            row.riemann_estimate =
                riemann::estimate_delta_loss(config.probe, finetune, record.w_post,
                                             outcome.perturbation, config.estimator_C,
                                             config.include_left_endpoint)
                    .value;
            row.exact_delta_loss = riemann::exact_delta_loss(config.probe, finetune, record.w_post,
                                                             outcome.perturbation);
            double fro_sq = 0.0;
            double numel = 0.0;
            double zeros = 0.0;
            double flips = 0.0;
            for (const auto & [name, m] : outcome.metrics) {
                const double n = double(delta.tensors.at(name).numel());
                fro_sq += m.frobenius_error * m.frobenius_error;
                zeros += m.sparsity_fraction * n;
                flips += m.sign_flip_fraction * n;
                numel += n;
            }
            row.frobenius_error = std::sqrt(fro_sq);
            row.sparsity = numel > 0.0 ? zeros / numel : 0.0;
            row.sign_flip_fraction = numel > 0.0 ? flips / numel : 0.0;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string csv_field(const std::string & text) {
    if (text.find_first_of(",\"\n") == std::string::npos) {
        return text;
    }
    std::string quoted = "\"";
    for (char c : text) {
        if (c == '"') {
            quoted += '"';
        }
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

} // namespace

std::string render_report(const std::vector<SweepRow> & rows, ReportFormat format) {
    if (rows.empty()) {
        throw Error(ErrorKind::InvalidConfig, "no rows to report");
    }
    if (format == ReportFormat::Json) {
        json out = json::array();
        for (const SweepRow & row : rows) {
            out.push_back({{"experiment", row.experiment},
                           {"op", row.op},
                           {"params_json", row.params},
                           {"seed", row.seed},
                           {"riemann_estimate", row.riemann_estimate},
                           {"exact_delta_loss", row.exact_delta_loss},
                           {"frobenius_error", row.frobenius_error},
                           {"sparsity", row.sparsity},
                           {"sign_flip_fraction", row.sign_flip_fraction}});
        }
        return out.dump(2) + "\n";
    }
    std::string text = "experiment,op,params_json,seed,riemann_estimate,exact_delta_loss,"
                       "frobenius_error,sparsity,sign_flip_fraction\n";
    for (const SweepRow & row : rows) {
        text += csv_field(row.experiment);
        text += ',';
        text += csv_field(row.op);
        text += ',';
        text += csv_field(row.params.dump());
        text += ',';
        text += std::to_string(row.seed);
        text += ',';
        text += format_double(row.riemann_estimate);
        text += ',';
        text += format_double(row.exact_delta_loss);
        text += ',';
        text += format_double(row.frobenius_error);
        text += ',';
        text += format_double(row.sparsity);
        text += ',';
        text += format_double(row.sign_flip_fraction);
        text += '\n';
    }
    return text;
}

void emit_report(const std::vector<SweepRow> & rows, const std::string & path,
                 ReportFormat format) {
    const std::string text = render_report(rows, format);
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) {
        throw Error(ErrorKind::IoError, "cannot open '" + path + "' for writing");
    }
    file.write(text.data(), ptrdiff_t(text.size()));
    file.flush();
    if (!file) {
        throw Error(ErrorKind::IoError, "write failure on '" + path + "'");
    }
}

} // namespace deltaforge::sweep
