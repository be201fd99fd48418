#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "deltaforge/tensor.hpp"

namespace deltaforge::probe {

// Self-contained differentiable toy models standing in for the post-trained
// network: parameters, loss, analytic gradient, plus a deterministic
// post-training simulator that produces (w_pre, w_post) pairs.
//
// All probe math runs in fp64; the NamedTensorMap surface widens fp32
// checkpoints on entry.

enum class Family { LinReg, LogReg, Mlp };
enum class Activation { Tanh, Relu };
enum class LossKind { Mse, CrossEntropy };

struct ProbeSpec {
    Family family = Family::LinReg;
    // linreg/logreg: [features, outputs]; mlp: >= 2 entries, input..output.
    std::vector<size_t> layer_sizes;
    Activation activation = Activation::Tanh; // mlp only
    LossKind loss = LossKind::Mse;
    uint64_t seed = 0;

    // Throws InvalidSpec on a family/loss mismatch or bad sizes.
    void validate() const;

    nlohmann::json to_json() const;
    static ProbeSpec from_json(const nlohmann::json & j);
};

struct ProbeDataset {
    size_t n_samples = 0;
    size_t n_features = 0;
    size_t n_outputs = 0;
    std::vector<double> inputs;  // n_samples x n_features, row-major
    std::vector<double> targets; // n_samples x n_outputs (mse)
    std::vector<int> labels;     // n_samples (cross_entropy)
    nlohmann::json generator_record;
};

// fp64 parameter bundle; keys follow the layout below.
using ParamsF64 = std::map<std::string, std::vector<double>>;

// Parameter names and shapes for a spec, in canonical (lexicographic) order.
// linreg/logreg: "weight" [features, outputs]. mlp: "layer<i>.weight",
// "layer<i>.bias" per layer.
std::vector<std::pair<std::string, std::vector<size_t>>> layout(const ProbeSpec & spec);

// Inputs are standard normal; targets come from a hidden ground-truth model
// plus noise. shift translates the ground-truth parameters along a seeded
// direction, producing the fine-tuning distribution.
ProbeDataset generate_dataset(const ProbeSpec & spec, size_t n_samples, double shift,
                              uint64_t seed);

// fp64 core.
double loss_f64(const ProbeSpec & spec, const ParamsF64 & params, const ProbeDataset & data);
ParamsF64 grad_f64(const ProbeSpec & spec, const ParamsF64 & params, const ProbeDataset & data);

// Layout-checked conversions between checkpoint maps and fp64 bundles.
ParamsF64 widen(const ProbeSpec & spec, const NamedTensorMap & params);
NamedTensorMap narrow(const ProbeSpec & spec, const ParamsF64 & params);

// Checkpoint-facing surface: mean loss over samples and the analytic
// gradient in the same layout as params.
double loss(const ProbeSpec & spec, const NamedTensorMap & params, const ProbeDataset & data);
NamedTensorMap grad(const ProbeSpec & spec, const NamedTensorMap & params, const ProbeDataset & data);

struct TrainRecord {
    NamedTensorMap w_pre;
    NamedTensorMap w_post;
    int steps_base = 0;
    int steps_finetune = 0;
    double learning_rate = 0.0;
    bool converged = false; // relative gradient norm at w_post below 1e-6
};

// Full-batch gradient descent: w_pre after steps_base on the base data from
// the seeded init, w_post after steps_finetune more on the fine-tune data,
// starting from the rounded w_pre checkpoint. Fully deterministic.
// Throws DivergedTraining if the loss becomes non-finite.
TrainRecord simulate_post_training(const ProbeSpec & spec, const ProbeDataset & base,
                                   const ProbeDataset & finetune, int steps_base,
                                   int steps_finetune, double learning_rate);

// The built-in model zoo used by sweeps and verification.
std::vector<std::pair<std::string, ProbeSpec>> builtin_zoo();

} // namespace deltaforge::probe
