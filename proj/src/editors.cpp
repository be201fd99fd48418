#include "deltaforge/editors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "deltaforge/rng.hpp"

namespace deltaforge::editors {

using nlohmann::json;

namespace {

// Assemble the outcome from the input and the edited copy. The perturbation
// is the fp32 elementwise difference, so edited - perturbation restores the
// input to within one rounding of the subtraction.
EditOutcome finalize(const DeltaSet & delta, DeltaSet edited, json op_record) {
    EditOutcome out;
    out.perturbation.source_pre = delta.source_pre;
    out.perturbation.source_post = delta.source_post;
    out.perturbation.selection = delta.selection;
    for (const auto & [name, original] : delta.tensors.entries) {
        const Tensor & changed = edited.tensors.at(name);
        Tensor pert;
        pert.shape = original.shape;
        pert.values.resize(original.values.size());
        TensorEditMetrics m;
        double sum_sq = 0.0;
        size_t flips = 0;
        size_t zeros = 0;
        for (size_t i = 0; i < original.values.size(); i++) {
            const float d = original.values[i];
            const float e = changed.values[i];
            pert.values[i] = e - d;
            sum_sq += double(pert.values[i]) * double(pert.values[i]);
            if ((d > 0.0f && e < 0.0f) || (d < 0.0f && e > 0.0f)) {
                flips++;
            }
            if (e == 0.0f) {
                zeros++;
            }
        }
        m.frobenius_error = std::sqrt(sum_sq);
        if (!original.values.empty()) {
            m.sign_flip_fraction = double(flips) / double(original.values.size());
            m.sparsity_fraction = double(zeros) / double(original.values.size());
        }
        out.metrics.emplace(name, m);
        out.perturbation.tensors.entries.emplace(name, std::move(pert));
    }
    out.edited = std::move(edited);
    out.op_record = std::move(op_record);
    return out;
}

json make_record(const char * op, json params) {
    return json{{"op", op}, {"params", std::move(params)}, {"seed", nullptr}};
}

json make_record(const char * op, json params, uint64_t seed) {
    return json{{"op", op}, {"params", std::move(params)}, {"seed", seed}};
}

void check_rate(double p) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw Error(ErrorKind::InvalidRate, "drop rate " + std::to_string(p) + " outside [0, 1)");
    }
}

// Element order sorted ascending by (|value|, index).
std::vector<size_t> magnitude_order(const std::vector<float> & values) {
    std::vector<size_t> order(values.size());
    std::iota(order.begin(), order.end(), size_t(0));
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const float ma = std::fabs(values[a]);
        const float mb = std::fabs(values[b]);
        return ma != mb ? ma < mb : a < b;
    });
    return order;
}

double mean_abs_f64(const std::vector<float> & values) {
    double sum = 0.0;
    for (float v : values) {
        sum += std::fabs(double(v));
    }
    return values.empty() ? 0.0 : sum / double(values.size());
}

} // namespace

EditOutcome drop_rescale(const DeltaSet & delta, double p, double k, uint64_t seed) {
    check_rate(p);
    BernoulliMask mask = sample_mask(shapes_of(delta.tensors), p, seed);
    EditOutcome out = drop_rescale_with_mask(delta, p, k, mask);
    out.op_record = make_record("drop_rescale", {{"p", p}, {"k", k}}, seed);
    return out;
}

EditOutcome drop_rescale_with_mask(const DeltaSet & delta, double p, double k,
                                   const BernoulliMask & mask) {
    check_rate(p);
    const double kept_scale = (1.0 - k * p) / (1.0 - p);
    DeltaSet edited = delta;
    for (auto & [name, tensor] : edited.tensors.entries) {
        if (!mask.tensors.contains(name)) {
            throw Error(ErrorKind::MissingTensor, "mask has no entry for '" + name + "'");
        }
        const Tensor & m = mask.tensors.at(name);
        if (!m.same_shape(tensor)) {
            throw Error(ErrorKind::ShapeMismatch, "mask shape differs for '" + name + "'");
        }
        for (size_t i = 0; i < tensor.values.size(); i++) {
            const double scale = m.values[i] != 0.0f ? k : kept_scale;
            tensor.values[i] = float(scale * double(tensor.values[i]));
        }
    }
    return finalize(delta, std::move(edited),
                    make_record("drop_rescale_masked", {{"p", p}, {"k", k}, {"mask_p", mask.p}},
                                mask.seed));
}

EditOutcome magnitude_aware_drop(const DeltaSet & delta, double p, double window, uint64_t seed) {
    if (!(p > 0.0 && p < 1.0)) {
        throw Error(ErrorKind::InvalidRate, "drop rate " + std::to_string(p) + " outside (0, 1)");
    }
    if (!(window >= 0.0 && window <= std::min(p, 1.0 - p))) {
        throw Error(ErrorKind::InvalidWindow,
                    "window " + std::to_string(window) + " outside [0, min(p, 1-p)]");
    }
    DeltaSet edited = delta;
    for (auto & [name, tensor] : edited.tensors.entries) {
        const std::vector<size_t> order = magnitude_order(delta.tensors.at(name).values);
        const size_t n = tensor.values.size();
        std::vector<double> drop_p(n, p);
        for (size_t rank = 0; rank < n; rank++) {
            const double q = n == 1 ? 0.5 : double(rank) / double(n - 1);
            drop_p[order[rank]] = p + window * (1.0 - 2.0 * q);
        }
        const uint64_t key = stream_key(seed, name);
        for (size_t i = 0; i < n; i++) {
            if (uniform_at(key, i) < drop_p[i]) {
                tensor.values[i] = float(0.0 * double(tensor.values[i]));
            } else {
                // same expression shape as drop_rescale so window = 0 is
                // bit-identical to drop_rescale(p, k = 0) at equal seed
                const double scale = 1.0 / (1.0 - drop_p[i]);
                tensor.values[i] = float(scale * double(tensor.values[i]));
            }
        }
    }
    return finalize(delta, std::move(edited),
                    make_record("magnitude_aware_drop", {{"p", p}, {"window", window}}, seed));
}

EditOutcome sign_biased_scale(const DeltaSet & delta, double p, double k, BiasOn bias_on,
                              const NamedTensorMap * gradient) {
    check_rate(p);
    if (bias_on == BiasOn::ProductSign && gradient == nullptr) {
        throw Error(ErrorKind::MissingGradient, "product_sign bias requires a gradient map");
    }
    const double plus_scale = (1.0 - k * p) / (1.0 - p);
    DeltaSet edited = delta;
    for (auto & [name, tensor] : edited.tensors.entries) {
        const Tensor * grad = nullptr;
        if (bias_on == BiasOn::ProductSign) {
            if (!gradient->contains(name)) {
                throw Error(ErrorKind::MissingGradient, "gradient has no entry for '" + name + "'");
            }
            grad = &gradient->at(name);
            if (!grad->same_shape(tensor)) {
                throw Error(ErrorKind::ShapeMismatch, "gradient shape differs for '" + name + "'");
            }
        }
        for (size_t i = 0; i < tensor.values.size(); i++) {
            const float d = tensor.values[i];
            bool negative_key;
            if (grad) {
                const float g = grad->values[i];
                negative_key = (d < 0.0f && g > 0.0f) || (d > 0.0f && g < 0.0f);
            } else {
                negative_key = d < 0.0f;
            }
            tensor.values[i] = float((negative_key ? k : plus_scale) * double(d));
        }
    }
    return finalize(delta, std::move(edited),
                    make_record("sign_biased_scale",
                                {{"p", p},
                                 {"k", k},
                                 {"bias", bias_on == BiasOn::ProductSign ? "product_sign"
                                                                         : "delta_sign"}}));
}

EditOutcome bitdelta(const DeltaSet & delta) {
    DeltaSet edited = delta;
    for (auto & [name, tensor] : edited.tensors.entries) {
        const double m = mean_abs_f64(tensor.values);
        for (float & v : tensor.values) {
            v = float(v < 0.0f ? -m : m);
        }
    }
    return finalize(delta, std::move(edited), make_record("bitdelta", json::object()));
}

EditOutcome bitdelta_perturbed_scale(const DeltaSet & delta, double factor) {
    if (!(factor > 0.0)) {
        throw Error(ErrorKind::InvalidFactor, "scale factor must be positive");
    }
    DeltaSet edited = delta;
    for (auto & [name, tensor] : edited.tensors.entries) {
        const double m = factor * mean_abs_f64(tensor.values);
        for (float & v : tensor.values) {
            v = float(v < 0.0f ? -m : m);
        }
    }
    return finalize(delta, std::move(edited),
                    make_record("bitdelta_perturbed_scale", {{"factor", factor}}));
}

EditOutcome bitdelta_sampled_scale(const DeltaSet & delta, ScaleDist dist, double spread,
                                   uint64_t seed) {
    if (!(spread >= 0.0)) {
        throw Error(ErrorKind::InvalidSpread, "spread must be non-negative");
    }
    DeltaSet edited = delta;
    for (auto & [name, tensor] : edited.tensors.entries) {
        const double m = mean_abs_f64(tensor.values);
        const uint64_t key = stream_key(seed, name);
        for (size_t i = 0; i < tensor.values.size(); i++) {
            double g;
            if (dist == ScaleDist::Normal) {
                g = std::fabs(m + spread * m * normal_at(key, i));
            } else {
                g = m + spread * m * (2.0 * uniform_at(key, i) - 1.0);
                g = std::max(g, 0.0);
            }
            tensor.values[i] = float(tensor.values[i] < 0.0f ? -g : g);
        }
    }
    return finalize(delta, std::move(edited),
                    make_record("bitdelta_sampled_scale",
                                {{"dist", dist == ScaleDist::Normal ? "normal" : "uniform"},
                                 {"spread", spread}},
                                seed));
}

EditOutcome multibit(const DeltaSet & delta, size_t blocks, bool signed_mean) {
    if (blocks < 1) {
        throw Error(ErrorKind::InvalidBlockCount, "block count must be at least 1");
    }
    DeltaSet edited = delta;
    for (auto & [name, tensor] : edited.tensors.entries) {
        const size_t n = tensor.values.size();
        if (blocks >= n) {
            continue;
        }
        const std::vector<size_t> order = magnitude_order(tensor.values);
        const size_t base = n / blocks;
        const size_t larger = n % blocks;
        size_t cursor = 0;
        std::vector<size_t> members;
        for (size_t b = 0; b < blocks; b++) {
            const size_t count = base + (b < larger ? 1 : 0);
            members.assign(order.begin() + ptrdiff_t(cursor),
                           order.begin() + ptrdiff_t(cursor + count));
            cursor += count;
            // accumulate in element order so a single block matches bitdelta
            std::sort(members.begin(), members.end());
            double sum = 0.0;
            for (size_t idx : members) {
                const double v = tensor.values[idx];
                sum += signed_mean ? v : std::fabs(v);
            }
            const double mean = sum / double(count);
            for (size_t idx : members) {
                if (signed_mean) {
                    tensor.values[idx] = float(mean);
                } else {
                    tensor.values[idx] = float(tensor.values[idx] < 0.0f ? -mean : mean);
                }
            }
        }
    }
    return finalize(delta, std::move(edited),
                    make_record("multibit", {{"blocks", blocks}, {"signed_mean", signed_mean}}));
}

EditOutcome svd_truncate(const DeltaSet & delta, size_t rank) {
    if (rank < 1) {
        throw Error(ErrorKind::RankOutOfRange, "rank must be at least 1");
    }
    DeltaSet edited = delta;
    for (auto & [name, tensor] : edited.tensors.entries) {
        if (tensor.rank() < 2) {
            throw Error(ErrorKind::NotAMatrix, "'" + name + "' has rank " +
                                                   std::to_string(tensor.rank()) +
                                                   ", need at least 2");
        }
        const size_t rows = tensor.shape[0];
        const size_t cols = tensor.numel() / rows;
        if (rank > std::min(rows, cols)) {
            throw Error(ErrorKind::RankOutOfRange,
                        "rank " + std::to_string(rank) + " exceeds min(" + std::to_string(rows) +
                            ", " + std::to_string(cols) + ") for '" + name + "'");
        }
        Eigen::MatrixXd a(rows, cols);
        for (size_t r = 0; r < rows; r++) {
            for (size_t c = 0; c < cols; c++) {
                a(ptrdiff_t(r), ptrdiff_t(c)) = tensor.values[r * cols + c];
            }
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto k = ptrdiff_t(rank);
        Eigen::MatrixXd rec = svd.matrixU().leftCols(k) *
                              svd.singularValues().head(k).asDiagonal() *
                              svd.matrixV().leftCols(k).transpose();
        for (size_t r = 0; r < rows; r++) {
            for (size_t c = 0; c < cols; c++) {
                tensor.values[r * cols + c] = float(rec(ptrdiff_t(r), ptrdiff_t(c)));
            }
        }
    }
    return finalize(delta, std::move(edited), make_record("svd_truncate", {{"rank", rank}}));
}

EditOutcome ties_prune(const DeltaSet & delta, double keep_fraction) {
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
        throw Error(ErrorKind::InvalidFraction,
                    "keep fraction " + std::to_string(keep_fraction) + " outside (0, 1]");
    }
    DeltaSet edited = delta;
    for (auto & [name, tensor] : edited.tensors.entries) {
        const size_t n = tensor.values.size();
        if (n == 0) {
            continue;
        }
        const size_t keep = std::min(n, size_t(std::ceil(keep_fraction * double(n))));
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), size_t(0));
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            const float ma = std::fabs(tensor.values[a]);
            const float mb = std::fabs(tensor.values[b]);
            return ma != mb ? ma > mb : a < b;
        });
        for (size_t rank = keep; rank < n; rank++) {
            tensor.values[order[rank]] = 0.0f;
        }
    }
    return finalize(delta, std::move(edited),
                    make_record("ties_prune", {{"keep_fraction", keep_fraction}}));
}

EditOutcome expo(const DeltaSet & delta, double alpha, bool allow_any_alpha) {
    if (alpha <= -1.0 && !allow_any_alpha) {
        throw Error(ErrorKind::AlphaOutOfRange,
                    "alpha " + std::to_string(alpha) + " erases or inverts the delta");
    }
    const double scale = 1.0 + alpha;
    DeltaSet edited = delta;
    for (auto & [name, tensor] : edited.tensors.entries) {
        for (float & v : tensor.values) {
            v = float(scale * double(v));
        }
    }
    json params = {{"alpha", alpha}};
    if (allow_any_alpha) {
        params["allow_any_alpha"] = true;
    }
    return finalize(delta, std::move(edited), make_record("expo", std::move(params)));
}

EditOutcome apply_op(const DeltaSet & delta, const json & op_record,
                     const NamedTensorMap * gradient) {
    if (!op_record.is_object() || !op_record.contains("op") || !op_record["op"].is_string()) {
        throw Error(ErrorKind::InvalidConfig, "op record has no 'op' name");
    }
    const std::string op = op_record["op"].get<std::string>();
    const json params = op_record.value("params", json::object());
    const uint64_t seed =
        op_record.contains("seed") && !op_record["seed"].is_null() ? op_record["seed"].get<uint64_t>() : 0;

    auto need = [&](const char * key) -> const json & {
        if (!params.contains(key)) {
            throw Error(ErrorKind::InvalidConfig,
                        "op '" + op + "' record is missing parameter '" + key + "'");
        }
        return params[key];
    };

    if (op == "drop_rescale") {
        return drop_rescale(delta, need("p").get<double>(), need("k").get<double>(), seed);
    }
    if (op == "drop_rescale_masked") {
        BernoulliMask mask =
            sample_mask(shapes_of(delta.tensors), need("mask_p").get<double>(), seed);
        return drop_rescale_with_mask(delta, need("p").get<double>(), need("k").get<double>(), mask);
    }
    if (op == "magnitude_aware_drop") {
        return magnitude_aware_drop(delta, need("p").get<double>(), need("window").get<double>(),
                                    seed);
    }
    if (op == "sign_biased_scale") {
        const std::string bias = need("bias").get<std::string>();
        if (bias != "delta_sign" && bias != "product_sign") {
            throw Error(ErrorKind::InvalidConfig, "unknown bias '" + bias + "'");
        }
        return sign_biased_scale(delta, need("p").get<double>(), need("k").get<double>(),
                                 bias == "product_sign" ? BiasOn::ProductSign : BiasOn::DeltaSign,
                                 gradient);
    }
    if (op == "bitdelta") {
        return bitdelta(delta);
    }
    if (op == "bitdelta_perturbed_scale") {
        return bitdelta_perturbed_scale(delta, need("factor").get<double>());
    }
    if (op == "bitdelta_sampled_scale") {
        const std::string dist = need("dist").get<std::string>();
        if (dist != "normal" && dist != "uniform") {
            throw Error(ErrorKind::InvalidConfig, "unknown distribution '" + dist + "'");
        }
        return bitdelta_sampled_scale(delta,
                                      dist == "normal" ? ScaleDist::Normal : ScaleDist::Uniform,
                                      need("spread").get<double>(), seed);
    }
    if (op == "multibit") {
        return multibit(delta, need("blocks").get<size_t>(), params.value("signed_mean", false));
    }
    if (op == "svd_truncate") {
        return svd_truncate(delta, need("rank").get<size_t>());
    }
    if (op == "ties_prune") {
        return ties_prune(delta, need("keep_fraction").get<double>());
    }
    if (op == "expo") {
        return expo(delta, need("alpha").get<double>(), params.value("allow_any_alpha", false));
    }
    throw Error(ErrorKind::InvalidConfig, "unknown op '" + op + "'");
}

} // namespace deltaforge::editors
