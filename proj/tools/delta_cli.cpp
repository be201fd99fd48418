// deltaforge command line: delta computation, editing, probe training,
// loss-change estimation, and parameter sweeps over toy probes.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "deltaforge/checkpoint_io.hpp"
#include "deltaforge/delta.hpp"
#include "deltaforge/editors.hpp"
#include "deltaforge/probe.hpp"
#include "deltaforge/riemann.hpp"
#include "deltaforge/sweep.hpp"

namespace df = deltaforge;
using nlohmann::json;

namespace {

json load_json(const std::string & path) {
    std::ifstream file(path);
    if (!file) {
        throw df::Error(df::ErrorKind::IoError, "cannot open '" + path + "' for reading");
    }
    try {
        return json::parse(file);
    } catch (const json::parse_error & e) {
        throw df::Error(df::ErrorKind::InvalidConfig,
                        "'" + path + "' is not valid JSON: " + e.what());
    }
}

// Probe run description shared by `probe train` and `estimate`:
// {"probe": {...}, "base_dataset": {...}, "finetune_dataset": {...},
//  "training": {...}} with the sweep-config defaults.
struct ProbeRun {
    df::probe::ProbeSpec spec;
    df::sweep::DatasetConfig base_data;
    df::sweep::DatasetConfig finetune_data;
    df::sweep::TrainingConfig training;
};

ProbeRun parse_probe_run(const json & j) {
    if (!j.is_object() || !j.contains("probe")) {
        throw df::Error(df::ErrorKind::InvalidConfig, "spec file needs a 'probe' object");
    }
    ProbeRun run;
    run.spec = df::probe::ProbeSpec::from_json(j["probe"]);
    auto dataset = [&](const char * key, uint64_t default_seed) {
        df::sweep::DatasetConfig config;
        config.seed = default_seed;
        if (j.contains(key)) {
            const json & d = j[key];
            config.n_samples = d.value("n_samples", config.n_samples);
            config.shift = d.value("shift", config.shift);
            config.seed = d.value("seed", config.seed);
        }
        return config;
    };
    run.base_data = dataset("base_dataset", 1);
    run.finetune_data = dataset("finetune_dataset", 2);
    if (j.contains("training")) {
        const json & t = j["training"];
        run.training.steps_base = t.value("steps_base", run.training.steps_base);
        run.training.steps_finetune = t.value("steps_finetune", run.training.steps_finetune);
        run.training.learning_rate = t.value("learning_rate", run.training.learning_rate);
    }
    return run;
}

struct EditArgs {
    std::string delta_path;
    std::string op;
    std::string out_path;
    std::string out_perturbation_path;
    std::string gradient_path;
    std::string bias = "delta";
    std::string dist = "normal";
    double p = 0.5;
    double k = 0.0;
    double alpha = 0.5;
    double keep = 0.5;
    double factor = 1.0;
    double spread = 0.1;
    double window = -1.0; // < 0 means derive from p
    uint64_t bits = 1;
    uint64_t blocks = 0; // 0 means derive from bits
    uint64_t rank = 1;
    uint64_t seed = 0;
    bool signed_mean = false;
    bool allow_any_alpha = false;
};

df::editors::EditOutcome run_edit(const EditArgs & args, const df::DeltaSet & delta) {
    using namespace df::editors;
    if (args.op == "dare") {
        return drop_rescale(delta, args.p, 0.0, args.seed);
    }
    if (args.op == "comp") {
        return drop_rescale(delta, args.p, args.k, args.seed);
    }
    if (args.op == "della") {
        const double window =
            args.window < 0.0 ? 0.5 * std::min(args.p, 1.0 - args.p) : args.window;
        return magnitude_aware_drop(delta, args.p, window, args.seed);
    }
    if (args.op == "biased") {
        if (args.bias != "delta" && args.bias != "product") {
            throw df::Error(df::ErrorKind::InvalidConfig,
                            "--bias must be delta or product, got '" + args.bias + "'");
        }
        df::NamedTensorMap gradient;
        const bool product = args.bias == "product";
        if (product) {
            if (args.gradient_path.empty()) {
                throw df::Error(df::ErrorKind::MissingGradient,
                                "--op biased --bias product needs --gradient");
            }
            gradient = df::load_checkpoint(args.gradient_path);
        }
        return sign_biased_scale(delta, args.p, args.k,
                                 product ? BiasOn::ProductSign : BiasOn::DeltaSign,
                                 product ? &gradient : nullptr);
    }
    if (args.op == "bitdelta") {
        return bitdelta(delta);
    }
    if (args.op == "bitdelta-scale") {
        return bitdelta_perturbed_scale(delta, args.factor);
    }
    if (args.op == "bitdelta-sample") {
        if (args.dist != "normal" && args.dist != "uniform") {
            throw df::Error(df::ErrorKind::InvalidConfig,
                            "--dist must be normal or uniform, got '" + args.dist + "'");
        }
        return bitdelta_sampled_scale(delta,
                                      args.dist == "normal" ? ScaleDist::Normal
                                                            : ScaleDist::Uniform,
                                      args.spread, args.seed);
    }
    if (args.op == "multibit") {
        const size_t blocks = args.blocks > 0 ? args.blocks : size_t(1) << args.bits;
        return multibit(delta, blocks, args.signed_mean);
    }
    if (args.op == "svd") {
        return svd_truncate(delta, args.rank);
    }
    if (args.op == "ties") {
        return ties_prune(delta, args.keep);
    }
    if (args.op == "expo") {
        return expo(delta, args.alpha, args.allow_any_alpha);
    }
    throw df::Error(df::ErrorKind::InvalidConfig, "unknown op '" + args.op + "'");
}

} // namespace

int main(int argc, char ** argv) {
    CLI::App app{"delta parameter editing toolkit"};
    app.require_subcommand(1);

    // compute
    auto * compute = app.add_subcommand("compute", "compute post - pre delta parameters");
    std::string compute_pre, compute_post, compute_out;
    std::string compute_select = "matrices";
    compute->add_option("--pre", compute_pre, "pre checkpoint")->required();
    compute->add_option("--post", compute_post, "post checkpoint")->required();
    compute->add_option("--select", compute_select, "all | matrices | list:a,b,c");
    compute->add_option("--out", compute_out, "output delta file")->required();

    // edit
    auto * edit = app.add_subcommand("edit", "apply an editing operator to a delta");
    EditArgs edit_args;
    edit->add_option("--delta", edit_args.delta_path, "input delta file")->required();
    edit->add_option("--op", edit_args.op,
                     "dare | comp | della | biased | bitdelta | bitdelta-scale | "
                     "bitdelta-sample | multibit | svd | ties | expo")
        ->required();
    edit->add_option("--p", edit_args.p, "drop rate");
    edit->add_option("--k", edit_args.k, "dropped-branch scale");
    edit->add_option("--alpha", edit_args.alpha, "extrapolation length");
    edit->add_option("--bits", edit_args.bits, "quantization bits (blocks = 2^bits)");
    edit->add_option("--blocks", edit_args.blocks, "block count (overrides --bits)");
    edit->add_option("--rank", edit_args.rank, "SVD truncation rank");
    edit->add_option("--keep", edit_args.keep, "kept fraction");
    edit->add_option("--factor", edit_args.factor, "scale factor");
    edit->add_option("--dist", edit_args.dist, "normal | uniform");
    edit->add_option("--spread", edit_args.spread, "relative width of the sampled scale");
    edit->add_option("--window", edit_args.window, "drop-probability half-range");
    edit->add_option("--bias", edit_args.bias, "delta | product");
    edit->add_option("--gradient", edit_args.gradient_path, "gradient checkpoint for --bias product");
    edit->add_option("--seed", edit_args.seed, "sampling seed");
    edit->add_flag("--signed-mean", edit_args.signed_mean, "signed block means for multibit");
    edit->add_flag("--allow-any-alpha", edit_args.allow_any_alpha, "permit alpha <= -1");
    edit->add_option("--out", edit_args.out_path, "output edited delta")->required();
    edit->add_option("--out-perturbation", edit_args.out_perturbation_path,
                     "also write the perturbation (edited - delta)");

    // apply
    auto * apply = app.add_subcommand("apply", "add an edited delta onto a pre checkpoint");
    std::string apply_pre, apply_edited, apply_out;
    apply->add_option("--pre", apply_pre, "pre checkpoint")->required();
    apply->add_option("--edited", apply_edited, "edited delta file")->required();
    apply->add_option("--out", apply_out, "output checkpoint")->required();

    // probe train
    auto * probe_cmd = app.add_subcommand("probe", "toy probe commands");
    probe_cmd->require_subcommand(1);
    auto * train = probe_cmd->add_subcommand("train", "simulate post-training on a probe");
    std::string train_spec, train_out_pre, train_out_post;
    train->add_option("--spec", train_spec, "probe run JSON")->required();
    train->add_option("--out-pre", train_out_pre, "output pre checkpoint")->required();
    train->add_option("--out-post", train_out_post, "output post checkpoint")->required();

    // estimate
    auto * estimate = app.add_subcommand("estimate", "Riemann estimate of the loss change");
    std::string est_spec, est_post, est_pert;
    int est_C = 5;
    bool est_skip_left = false;
    estimate->add_option("--spec", est_spec, "probe run JSON")->required();
    estimate->add_option("--post", est_post, "post checkpoint")->required();
    estimate->add_option("--perturbation", est_pert, "perturbation file")->required();
    estimate->add_option("--C", est_C, "subdivision count");
    estimate->add_flag("--skip-left", est_skip_left, "drop the t = 0 sample point");

    // sweep
    auto * sweep_cmd = app.add_subcommand("sweep", "run an experiment grid and emit a report");
    std::string sweep_config, sweep_out;
    std::string sweep_format = "csv";
    sweep_cmd->add_option("--config", sweep_config, "sweep config JSON")->required();
    sweep_cmd->add_option("--out", sweep_out, "report path")->required();
    sweep_cmd->add_option("--format", sweep_format, "csv | json");

    try {
        app.parse(argc, argv);

        if (compute->parsed()) {
            const df::NamedTensorMap pre = df::load_checkpoint(compute_pre);
            const df::NamedTensorMap post = df::load_checkpoint(compute_post);
            df::DeltaSet delta =
                df::compute_delta(post, pre, df::TensorSelection::parse(compute_select));
            delta.source_pre = compute_pre;
            delta.source_post = compute_post;
            df::save_checkpoint(df::delta_to_map(delta), compute_out);
        } else if (edit->parsed()) {
            const df::DeltaSet delta = df::delta_from_map(df::load_checkpoint(edit_args.delta_path));
            const df::editors::EditOutcome outcome = run_edit(edit_args, delta);
            df::NamedTensorMap out = df::delta_to_map(outcome.edited);
            out.metadata["deltaforge_op"] = outcome.op_record.dump();
            df::save_checkpoint(out, edit_args.out_path);
            if (!edit_args.out_perturbation_path.empty()) {
                df::NamedTensorMap pert = df::delta_to_map(outcome.perturbation);
                pert.metadata["deltaforge_op"] = outcome.op_record.dump();
                df::save_checkpoint(pert, edit_args.out_perturbation_path);
            }
        } else if (apply->parsed()) {
            const df::NamedTensorMap pre = df::load_checkpoint(apply_pre);
            const df::NamedTensorMap edited_map = df::load_checkpoint(apply_edited);
            df::NamedTensorMap out = df::apply_delta(pre, df::delta_from_map(edited_map));
            auto op = edited_map.metadata.find("deltaforge_op");
            if (op != edited_map.metadata.end()) {
                out.metadata["deltaforge_op"] = op->second;
            }
            df::save_checkpoint(out, apply_out);
        } else if (train->parsed()) {
            const ProbeRun run = parse_probe_run(load_json(train_spec));
            const df::probe::ProbeDataset base = generate_dataset(
                run.spec, run.base_data.n_samples, run.base_data.shift, run.base_data.seed);
            const df::probe::ProbeDataset finetune =
                generate_dataset(run.spec, run.finetune_data.n_samples, run.finetune_data.shift,
                                 run.finetune_data.seed);
            const df::probe::TrainRecord record = simulate_post_training(
                run.spec, base, finetune, run.training.steps_base, run.training.steps_finetune,
                run.training.learning_rate);
            df::save_checkpoint(record.w_pre, train_out_pre);
            df::save_checkpoint(record.w_post, train_out_post);
        } else if (estimate->parsed()) {
            const ProbeRun run = parse_probe_run(load_json(est_spec));
            const df::probe::ProbeDataset finetune =
                generate_dataset(run.spec, run.finetune_data.n_samples, run.finetune_data.shift,
                                 run.finetune_data.seed);
            const df::NamedTensorMap post = df::load_checkpoint(est_post);
            const df::NamedTensorMap pert_map = df::load_checkpoint(est_pert);
            const df::DeltaSet pert = df::delta_from_map(pert_map);
            df::riemann::RiemannEstimate est = df::riemann::estimate_delta_loss(
                run.spec, finetune, post, pert, est_C, !est_skip_left);
            est.exact = df::riemann::exact_delta_loss(run.spec, finetune, post, pert);
            json op_record(nullptr);
            auto op = pert_map.metadata.find("deltaforge_op");
            if (op != pert_map.metadata.end()) {
                op_record = json::parse(op->second);
            }
            std::cout << est.to_json(op_record).dump(2) << "\n";
        } else if (sweep_cmd->parsed()) {
            if (sweep_format != "csv" && sweep_format != "json") {
                throw df::Error(df::ErrorKind::InvalidConfig,
                                "--format must be csv or json, got '" + sweep_format + "'");
            }
            const df::sweep::SweepConfig config =
                df::sweep::SweepConfig::from_json(load_json(sweep_config));
            const std::vector<df::sweep::SweepRow> rows = df::sweep::run_sweep(config);
            df::sweep::emit_report(rows, sweep_out,
                                   sweep_format == "csv" ? df::sweep::ReportFormat::Csv
                                                         : df::sweep::ReportFormat::Json);
        }
        return 0;
    } catch (const CLI::ParseError & e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const df::Error & e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.is_io() ? 2 : 1;
    } catch (const std::exception & e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
