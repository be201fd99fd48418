#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deltaforge/delta.hpp"
#include "deltaforge/probe.hpp"

namespace deltaforge::sweep {

// One training run per config; each grid point's operator is applied to the
// same delta and scored with the Riemann estimate and the exact loss change.

enum class Experiment {
    DareGrid,       // grid: {"p": [...], "k": [...]}
    BitdeltaBits,   // grid: {"bits": [...]} and/or {"blocks": [...]}
    BitdeltaScale,  // grid: {"factor": [...]}
    ExpoAlpha,      // grid: {"alpha": [...]}
    TiesFraction,   // grid: {"keep": [...]}
    SvdRank,        // grid: {"rank": [...]}
    BiasedAblation, // grid: {"p": [...], "k": [...], "bias": ["delta","product"]}
};

struct DatasetConfig {
    size_t n_samples = 256;
    double shift = 0.0;
    uint64_t seed = 0;
};

struct TrainingConfig {
    int steps_base = 400;
    int steps_finetune = 40;
    double learning_rate = 0.05;
};

struct SweepConfig {
    probe::ProbeSpec probe;
    DatasetConfig base_data;
    DatasetConfig finetune_data;
    TrainingConfig training;
    Experiment experiment = Experiment::DareGrid;
    nlohmann::json grid;
    std::vector<uint64_t> seeds;
    int estimator_C = 5;
    bool include_left_endpoint = true;
    TensorSelection selection;

    static SweepConfig from_json(const nlohmann::json & j);
};

struct SweepRow {
    std::string experiment;
    std::string op;
    nlohmann::json params;
    uint64_t seed = 0;
    double riemann_estimate = 0.0;
    double exact_delta_loss = 0.0;
    // Aggregates over all edited tensors: global Frobenius error, global
    // zero fraction, global strict sign-flip fraction.
    double frobenius_error = 0.0;
    double sparsity = 0.0;
    double sign_flip_fraction = 0.0;
};

std::vector<SweepRow> run_sweep(const SweepConfig & config);

enum class ReportFormat { Csv, Json };

// CSV columns, exactly:
//   experiment,op,params_json,seed,riemann_estimate,exact_delta_loss,
//   frobenius_error,sparsity,sign_flip_fraction
// Deterministic: the same rows render to identical bytes.
std::string render_report(const std::vector<SweepRow> & rows, ReportFormat format);
void emit_report(const std::vector<SweepRow> & rows, const std::string & path, ReportFormat format);

} // namespace deltaforge::sweep
