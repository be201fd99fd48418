#pragma once

#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "deltaforge/delta.hpp"
#include "deltaforge/probe.hpp"

namespace deltaforge::riemann {

// The Riemann-sum approximation of the loss change a perturbation causes:
//   (1/C) * sum_c <grad L(w_post + t_c * pert), pert>
// with t_c = c/C for c = 0..C-1, or c = 1..C-1 when the left endpoint is
// skipped (the 4-point variant at C = 5 samples 0.2, 0.4, 0.6, 0.8).
struct RiemannEstimate {
    double value = 0.0;
    std::vector<double> terms;
    int C = 0;
    std::vector<double> sample_points;
    std::optional<double> exact;

    nlohmann::json to_json(const nlohmann::json & op_record = nullptr) const;
};

// Sum over tensors in canonical order of the elementwise product, fp64
// accumulation. Name sets and shapes must agree.
double frobenius_inner(const NamedTensorMap & a, const NamedTensorMap & b);

// C independent gradient evaluations; all arithmetic in fp64. The
// perturbation may cover a subset of the parameter layout; uncovered
// tensors stay fixed and contribute nothing to the inner products.
RiemannEstimate estimate_delta_loss(const probe::ProbeSpec & spec, const probe::ProbeDataset & data,
                                    const NamedTensorMap & w_post, const DeltaSet & perturbation,
                                    int C, bool include_left_endpoint = true);

// The oracle the estimate is judged against:
//   L(w_post + pert) - L(w_post)
double exact_delta_loss(const probe::ProbeSpec & spec, const probe::ProbeDataset & data,
                        const NamedTensorMap & w_post, const DeltaSet & perturbation);

} // namespace deltaforge::riemann
