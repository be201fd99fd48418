#include "deltaforge/probe.hpp"

#include <algorithm>
#include <cmath>

#include "deltaforge/rng.hpp"

namespace deltaforge::probe {

using nlohmann::json;

namespace {

const char * family_name(Family f) {
    switch (f) {
        case Family::LinReg: return "linreg";
        case Family::LogReg: return "logreg";
        case Family::Mlp: return "mlp";
    }
    return "linreg";
}

size_t product(const std::vector<size_t> & shape) {
    size_t n = 1;
    for (size_t d : shape) {
        n *= d;
    }
    return n;
}

void check_layout(const ProbeSpec & spec, const ParamsF64 & params) {
    const auto expected = layout(spec);
    if (params.size() != expected.size()) {
        throw Error(ErrorKind::LayoutMismatch,
                    "expected " + std::to_string(expected.size()) + " parameter tensors, got " +
                        std::to_string(params.size()));
    }
    for (const auto & [name, shape] : expected) {
        auto it = params.find(name);
        if (it == params.end()) {
            throw Error(ErrorKind::LayoutMismatch, "missing parameter '" + name + "'");
        }
        if (it->second.size() != product(shape)) {
            throw Error(ErrorKind::LayoutMismatch, "parameter '" + name + "' has wrong size");
        }
    }
}

// Per-layer weight scale 1/sqrt(fan_in); biases use a flat 0.1.
double param_scale(const std::string & name, const std::vector<size_t> & shape) {
    if (name.find("bias") != std::string::npos) {
        return 0.1;
    }
    return 1.0 / std::sqrt(double(shape[0]));
}

ParamsF64 random_params(const ProbeSpec & spec, const std::string & stream, uint64_t seed) {
    ParamsF64 params;
    for (const auto & [name, shape] : layout(spec)) {
        const uint64_t key = stream_key(seed, stream + "." + name);
        const double scale = param_scale(name, shape);
        std::vector<double> values(product(shape));
        for (size_t i = 0; i < values.size(); i++) {
            values[i] = scale * normal_at(key, i);
        }
        params.emplace(name, std::move(values));
    }
    return params;
}

// Forward pass; per-layer pre-activations are kept when `pre_acts` is given.
// The final layer is linear, hidden layers apply the spec activation.
std::vector<double> forward(const ProbeSpec & spec, const ParamsF64 & params,
                            const std::vector<double> & inputs, size_t n_samples,
                            std::vector<std::vector<double>> * pre_acts = nullptr,
                            std::vector<std::vector<double>> * acts = nullptr) {
    if (spec.family != Family::Mlp) {
        const size_t f = spec.layer_sizes[0];
        const size_t o = spec.layer_sizes[1];
        const std::vector<double> & w = params.at("weight");
        std::vector<double> out(n_samples * o, 0.0);
        for (size_t s = 0; s < n_samples; s++) {
            for (size_t j = 0; j < f; j++) {
                const double x = inputs[s * f + j];
                for (size_t c = 0; c < o; c++) {
                    out[s * o + c] += x * w[j * o + c];
                }
            }
        }
        return out;
    }

    const size_t layers = spec.layer_sizes.size() - 1;
    std::vector<double> current = inputs;
    size_t width = spec.layer_sizes[0];
    if (acts) {
        acts->clear();
        acts->push_back(current);
    }
    for (size_t l = 0; l < layers; l++) {
        const size_t in = spec.layer_sizes[l];
        const size_t out_w = spec.layer_sizes[l + 1];
        const std::vector<double> & w = params.at("layer" + std::to_string(l) + ".weight");
        const std::vector<double> & b = params.at("layer" + std::to_string(l) + ".bias");
        std::vector<double> z(n_samples * out_w);
        for (size_t s = 0; s < n_samples; s++) {
            for (size_t c = 0; c < out_w; c++) {
                z[s * out_w + c] = b[c];
            }
            for (size_t j = 0; j < in; j++) {
                const double x = current[s * width + j];
                for (size_t c = 0; c < out_w; c++) {
                    z[s * out_w + c] += x * w[j * out_w + c];
                }
            }
        }
        if (pre_acts) {
            pre_acts->push_back(z);
        }
        if (l + 1 < layers) {
            for (double & v : z) {
                v = spec.activation == Activation::Tanh ? std::tanh(v) : std::max(v, 0.0);
            }
        }
        current = std::move(z);
        width = out_w;
        if (acts && l + 1 < layers) {
            acts->push_back(current);
        }
    }
    return current;
}

// loss and output-layer residual (dL/dlogits per sample, already divided by n)
double loss_and_residual(const ProbeSpec & spec, const std::vector<double> & out,
                         const ProbeDataset & data, std::vector<double> * residual) {
    const size_t n = data.n_samples;
    const size_t o = data.n_outputs;
    double total = 0.0;
    if (residual) {
        residual->assign(n * o, 0.0);
    }
    if (spec.loss == LossKind::Mse) {
        for (size_t s = 0; s < n; s++) {
            for (size_t c = 0; c < o; c++) {
                const double r = out[s * o + c] - data.targets[s * o + c];
                total += 0.5 * r * r;
                if (residual) {
                    (*residual)[s * o + c] = r / double(n);
                }
            }
        }
    } else {
        for (size_t s = 0; s < n; s++) {
            double top = out[s * o];
            for (size_t c = 1; c < o; c++) {
                top = std::max(top, out[s * o + c]);
            }
            double sum_exp = 0.0;
            for (size_t c = 0; c < o; c++) {
                sum_exp += std::exp(out[s * o + c] - top);
            }
            const double lse = top + std::log(sum_exp);
            const int label = data.labels[s];
            total += lse - out[s * o + size_t(label)];
            if (residual) {
                for (size_t c = 0; c < o; c++) {
                    double p = std::exp(out[s * o + c] - top) / sum_exp;
                    if (int(c) == label) {
                        p -= 1.0;
                    }
                    (*residual)[s * o + c] = p / double(n);
                }
            }
        }
    }
    return total / double(n);
}

void check_data(const ProbeSpec & spec, const ProbeDataset & data) {
    if (data.n_samples < 1 || data.n_features != spec.layer_sizes.front() ||
        data.n_outputs != spec.layer_sizes.back()) {
        throw Error(ErrorKind::InvalidSpec, "dataset does not match the probe dimensions");
    }
    if (spec.loss == LossKind::Mse) {
        if (data.targets.size() != data.n_samples * data.n_outputs) {
            throw Error(ErrorKind::InvalidSpec, "dataset target size mismatch");
        }
    } else if (data.labels.size() != data.n_samples) {
        throw Error(ErrorKind::InvalidSpec, "dataset label count mismatch");
    }
}

} // namespace

void ProbeSpec::validate() const {
    if (layer_sizes.size() < 2) {
        throw Error(ErrorKind::InvalidSpec, "layer_sizes needs at least [input, output]");
    }
    for (size_t d : layer_sizes) {
        if (d < 1) {
            throw Error(ErrorKind::InvalidSpec, "zero-width layer");
        }
    }
    if (family == Family::LinReg) {
        if (loss != LossKind::Mse || layer_sizes.size() != 2) {
            throw Error(ErrorKind::InvalidSpec, "linreg pairs with mse and [features, outputs]");
        }
    } else if (family == Family::LogReg) {
        if (loss != LossKind::CrossEntropy || layer_sizes.size() != 2) {
            throw Error(ErrorKind::InvalidSpec,
                        "logreg pairs with cross_entropy and [features, classes]");
        }
    }
    if (loss == LossKind::CrossEntropy && layer_sizes.back() < 2) {
        throw Error(ErrorKind::InvalidSpec, "cross_entropy needs at least 2 classes");
    }
}

json ProbeSpec::to_json() const {
    json j;
    j["family"] = family_name(family);
    j["layer_sizes"] = layer_sizes;
    if (family == Family::Mlp) {
        j["activation"] = activation == Activation::Tanh ? "tanh" : "relu";
    }
    j["loss"] = loss == LossKind::Mse ? "mse" : "cross_entropy";
    j["seed"] = seed;
    return j;
}

ProbeSpec ProbeSpec::from_json(const json & j) {
    ProbeSpec spec;
    const std::string family = j.value("family", "");
    if (family == "linreg") {
        spec.family = Family::LinReg;
        spec.loss = LossKind::Mse;
    } else if (family == "logreg") {
        spec.family = Family::LogReg;
        spec.loss = LossKind::CrossEntropy;
    } else if (family == "mlp") {
        spec.family = Family::Mlp;
    } else {
        throw Error(ErrorKind::InvalidSpec, "unknown probe family '" + family + "'");
    }
    if (!j.contains("layer_sizes") || !j["layer_sizes"].is_array()) {
        throw Error(ErrorKind::InvalidSpec, "probe spec needs a layer_sizes array");
    }
    spec.layer_sizes = j["layer_sizes"].get<std::vector<size_t>>();
    if (j.contains("activation")) {
        const std::string act = j["activation"].get<std::string>();
        if (act == "tanh") {
            spec.activation = Activation::Tanh;
        } else if (act == "relu") {
            spec.activation = Activation::Relu;
        } else {
            throw Error(ErrorKind::InvalidSpec, "unknown activation '" + act + "'");
        }
    }
    if (j.contains("loss")) {
        const std::string loss = j["loss"].get<std::string>();
        if (loss == "mse") {
            spec.loss = LossKind::Mse;
        } else if (loss == "cross_entropy") {
            spec.loss = LossKind::CrossEntropy;
        } else {
            throw Error(ErrorKind::InvalidSpec, "unknown loss '" + loss + "'");
        }
    }
    spec.seed = j.value("seed", uint64_t(0));
    spec.validate();
    return spec;
}

std::vector<std::pair<std::string, std::vector<size_t>>> layout(const ProbeSpec & spec) {
    spec.validate();
    std::vector<std::pair<std::string, std::vector<size_t>>> out;
    if (spec.family == Family::Mlp) {
        for (size_t l = 0; l + 1 < spec.layer_sizes.size(); l++) {
            const std::string prefix = "layer" + std::to_string(l);
            out.emplace_back(prefix + ".weight",
                             std::vector<size_t>{spec.layer_sizes[l], spec.layer_sizes[l + 1]});
            out.emplace_back(prefix + ".bias", std::vector<size_t>{spec.layer_sizes[l + 1]});
        }
    } else {
        out.emplace_back("weight", std::vector<size_t>{spec.layer_sizes[0], spec.layer_sizes[1]});
    }
    std::sort(out.begin(), out.end());
    return out;
}

ProbeDataset generate_dataset(const ProbeSpec & spec, size_t n_samples, double shift,
                              uint64_t seed) {
    spec.validate();
    if (n_samples < 1) {
        throw Error(ErrorKind::InvalidSpec, "n_samples must be at least 1");
    }
    const size_t f = spec.layer_sizes.front();
    const size_t o = spec.layer_sizes.back();

    ProbeDataset data;
    data.n_samples = n_samples;
    data.n_features = f;
    data.n_outputs = o;

    data.inputs.resize(n_samples * f);
    const uint64_t input_key = stream_key(seed, "inputs");
    for (size_t i = 0; i < data.inputs.size(); i++) {
        data.inputs[i] = normal_at(input_key, i);
    }

    // Hidden ground truth is keyed by the spec seed so base (shift 0) and
    // fine-tune (shift != 0) datasets share it; the dataset seed only drives
    // inputs, noise, and label sampling.
    ParamsF64 truth = random_params(spec, "gt", spec.seed);
    if (shift != 0.0) {
        for (auto & [name, values] : truth) {
            const uint64_t key = stream_key(spec.seed, "shift_dir." + name);
            const double scale = shift / std::sqrt(double(values.size()));
            for (size_t i = 0; i < values.size(); i++) {
                values[i] += scale * normal_at(key, i);
            }
        }
    }

    const std::vector<double> out = forward(spec, truth, data.inputs, n_samples);
    const double noise_scale = 0.1;
    if (spec.loss == LossKind::Mse) {
        data.targets.resize(n_samples * o);
        const uint64_t noise_key = stream_key(seed, "noise");
        for (size_t i = 0; i < data.targets.size(); i++) {
            data.targets[i] = out[i] + noise_scale * normal_at(noise_key, i);
        }
    } else {
        data.labels.resize(n_samples);
        const uint64_t label_key = stream_key(seed, "labels");
        for (size_t s = 0; s < n_samples; s++) {
            double top = out[s * o];
            for (size_t c = 1; c < o; c++) {
                top = std::max(top, out[s * o + c]);
            }
            double sum_exp = 0.0;
            for (size_t c = 0; c < o; c++) {
                sum_exp += std::exp(out[s * o + c] - top);
            }
            const double u = uniform_at(label_key, s);
            double acc = 0.0;
            int label = int(o) - 1;
            for (size_t c = 0; c < o; c++) {
                acc += std::exp(out[s * o + c] - top) / sum_exp;
                if (u < acc) {
                    label = int(c);
                    break;
                }
            }
            data.labels[s] = label;
        }
    }

    data.generator_record = {{"n_samples", n_samples},
                             {"shift", shift},
                             {"seed", seed},
                             {"noise", noise_scale},
                             {"spec_seed", spec.seed}};
    return data;
}

double loss_f64(const ProbeSpec & spec, const ParamsF64 & params, const ProbeDataset & data) {
    spec.validate();
    check_layout(spec, params);
    check_data(spec, data);
    const std::vector<double> out = forward(spec, params, data.inputs, data.n_samples);
    return loss_and_residual(spec, out, data, nullptr);
}

ParamsF64 grad_f64(const ProbeSpec & spec, const ParamsF64 & params, const ProbeDataset & data) {
    spec.validate();
    check_layout(spec, params);
    check_data(spec, data);
    const size_t n = data.n_samples;

    if (spec.family != Family::Mlp) {
        const size_t f = spec.layer_sizes[0];
        const size_t o = spec.layer_sizes[1];
        const std::vector<double> out = forward(spec, params, data.inputs, n);
        std::vector<double> residual;
        loss_and_residual(spec, out, data, &residual);
        ParamsF64 grad;
        std::vector<double> gw(f * o, 0.0);
        for (size_t s = 0; s < n; s++) {
            for (size_t j = 0; j < f; j++) {
                const double x = data.inputs[s * f + j];
                for (size_t c = 0; c < o; c++) {
                    gw[j * o + c] += x * residual[s * o + c];
                }
            }
        }
        grad.emplace("weight", std::move(gw));
        return grad;
    }

    std::vector<std::vector<double>> pre_acts; // per layer, n  x width
    std::vector<std::vector<double>> acts;     // inputs of each layer
    const std::vector<double> out = forward(spec, params, data.inputs, n, &pre_acts, &acts);
    std::vector<double> delta;
    loss_and_residual(spec, out, data, &delta);

    const size_t layers = spec.layer_sizes.size() - 1;
    ParamsF64 grad;
    for (size_t li = layers; li-- > 0;) {
        const size_t in = spec.layer_sizes[li];
        const size_t width = spec.layer_sizes[li + 1];
        const std::vector<double> & a = acts[li];
        std::vector<double> gw(in * width, 0.0);
        std::vector<double> gb(width, 0.0);
        for (size_t s = 0; s < n; s++) {
            for (size_t c = 0; c < width; c++) {
                gb[c] += delta[s * width + c];
            }
            for (size_t j = 0; j < in; j++) {
                const double x = a[s * in + j];
                for (size_t c = 0; c < width; c++) {
                    gw[j * width + c] += x * delta[s * width + c];
                }
            }
        }
        const std::string prefix = "layer" + std::to_string(li);
        if (li > 0) {
            const std::vector<double> & w = params.at(prefix + ".weight");
            const std::vector<double> & z = pre_acts[li - 1];
            std::vector<double> prev(n * in, 0.0);
            for (size_t s = 0; s < n; s++) {
                for (size_t j = 0; j < in; j++) {
                    double sum = 0.0;
                    for (size_t c = 0; c < width; c++) {
                        sum += w[j * width + c] * delta[s * width + c];
                    }
                    const double zv = z[s * in + j];
                    if (spec.activation == Activation::Tanh) {
                        const double t = std::tanh(zv);
                        sum *= 1.0 - t * t;
                    } else if (zv <= 0.0) {
                        sum = 0.0;
                    }
                    prev[s * in + j] = sum;
                }
            }
            delta = std::move(prev);
        }
        grad.emplace(prefix + ".weight", std::move(gw));
        grad.emplace(prefix + ".bias", std::move(gb));
    }
    return grad;
}

ParamsF64 widen(const ProbeSpec & spec, const NamedTensorMap & params) {
    const auto expected = layout(spec);
    if (params.size() != expected.size()) {
        throw Error(ErrorKind::LayoutMismatch,
                    "expected " + std::to_string(expected.size()) + " parameter tensors, got " +
                        std::to_string(params.size()));
    }
    ParamsF64 out;
    for (const auto & [name, shape] : expected) {
        if (!params.contains(name)) {
            throw Error(ErrorKind::LayoutMismatch, "missing parameter '" + name + "'");
        }
        const Tensor & t = params.at(name);
        if (t.shape != shape) {
            throw Error(ErrorKind::LayoutMismatch, "parameter '" + name + "' has wrong shape");
        }
        std::vector<double> values(t.values.begin(), t.values.end());
        out.emplace(name, std::move(values));
    }
    return out;
}

NamedTensorMap narrow(const ProbeSpec & spec, const ParamsF64 & params) {
    check_layout(spec, params);
    NamedTensorMap out;
    for (const auto & [name, shape] : layout(spec)) {
        Tensor t;
        t.shape = shape;
        const std::vector<double> & values = params.at(name);
        t.values.assign(values.begin(), values.end());
        out.entries.emplace(name, std::move(t));
    }
    return out;
}

double loss(const ProbeSpec & spec, const NamedTensorMap & params, const ProbeDataset & data) {
    return loss_f64(spec, widen(spec, params), data);
}

NamedTensorMap grad(const ProbeSpec & spec, const NamedTensorMap & params,
                    const ProbeDataset & data) {
    return narrow(spec, grad_f64(spec, widen(spec, params), data));
}

TrainRecord simulate_post_training(const ProbeSpec & spec, const ProbeDataset & base,
                                   const ProbeDataset & finetune, int steps_base,
                                   int steps_finetune, double learning_rate) {
    spec.validate();
    if (steps_base < 0 || steps_finetune < 0 || !(learning_rate > 0.0)) {
        throw Error(ErrorKind::InvalidSpec, "step counts must be >= 0 and learning rate > 0");
    }

    auto descend = [&](ParamsF64 params, const ProbeDataset & data, int steps) {
        for (int step = 0; step < steps; step++) {
            const ParamsF64 g = grad_f64(spec, params, data);
            for (auto & [name, values] : params) {
                const std::vector<double> & gv = g.at(name);
                for (size_t i = 0; i < values.size(); i++) {
                    values[i] -= learning_rate * gv[i];
                }
            }
        }
        const double final_loss = loss_f64(spec, params, data);
        if (!std::isfinite(final_loss)) {
            throw Error(ErrorKind::DivergedTraining,
                        "loss is not finite after " + std::to_string(steps) + " steps");
        }
        return params;
    };

    TrainRecord record;
    record.steps_base = steps_base;
    record.steps_finetune = steps_finetune;
    record.learning_rate = learning_rate;

    ParamsF64 params = descend(random_params(spec, "init", spec.seed), base, steps_base);
    record.w_pre = narrow(spec, params);

    // fine-tuning continues from the rounded fp32 checkpoint, as a separate
    // training run would
    params = descend(widen(spec, record.w_pre), finetune, steps_finetune);
    record.w_post = narrow(spec, params);

    const ParamsF64 rounded = widen(spec, record.w_post);
    const ParamsF64 g = grad_f64(spec, rounded, finetune);
    double g_sq = 0.0;
    double w_sq = 0.0;
    for (const auto & [name, values] : rounded) {
        const std::vector<double> & gv = g.at(name);
        for (size_t i = 0; i < values.size(); i++) {
            g_sq += gv[i] * gv[i];
            w_sq += values[i] * values[i];
        }
    }
    record.converged = w_sq > 0.0 && std::sqrt(g_sq) / std::sqrt(w_sq) < 1e-6;

    const std::string spec_text = spec.to_json().dump();
    record.w_pre.metadata["probe_spec"] = spec_text;
    record.w_post.metadata["probe_spec"] = spec_text;
    return record;
}

std::vector<std::pair<std::string, ProbeSpec>> builtin_zoo() {
    std::vector<std::pair<std::string, ProbeSpec>> zoo;

    ProbeSpec linreg;
    linreg.family = Family::LinReg;
    linreg.layer_sizes = {16, 1};
    linreg.loss = LossKind::Mse;
    linreg.seed = 101;
    zoo.emplace_back("linreg16", linreg);

    ProbeSpec logreg;
    logreg.family = Family::LogReg;
    logreg.layer_sizes = {16, 4};
    logreg.loss = LossKind::CrossEntropy;
    logreg.seed = 202;
    zoo.emplace_back("logreg16x4", logreg);

    ProbeSpec mlp;
    mlp.family = Family::Mlp;
    mlp.layer_sizes = {16, 32, 4};

    mlp.activation = Activation::Tanh;
    mlp.loss = LossKind::Mse;
    mlp.seed = 303;
    zoo.emplace_back("mlp_tanh_mse", mlp);

    mlp.loss = LossKind::CrossEntropy;
    mlp.seed = 404;
    zoo.emplace_back("mlp_tanh_xent", mlp);

    mlp.activation = Activation::Relu;
    mlp.loss = LossKind::Mse;
    mlp.seed = 505;
    zoo.emplace_back("mlp_relu_mse", mlp);

    mlp.loss = LossKind::CrossEntropy;
    mlp.seed = 606;
    zoo.emplace_back("mlp_relu_xent", mlp);

    return zoo;
}

} // namespace deltaforge::probe
