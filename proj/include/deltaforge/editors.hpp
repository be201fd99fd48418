#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "deltaforge/delta.hpp"

namespace deltaforge::editors {

// Per-tensor summary of what an edit did.
struct TensorEditMetrics {
    double frobenius_error = 0.0;    // ||edited - delta||_F
    double sign_flip_fraction = 0.0; // strict sign flips, zeros count as no flip
    double sparsity_fraction = 0.0;  // exact zeros in the edited tensor
};

// Result of one editing operator F applied to a delta:
//   edited       = F(delta)
//   perturbation = F(delta) - delta, the quantity the loss estimator consumes,
//                  stored as the single-rounded fp32 difference per element
//   op_record    = {"op", "params", "seed"}; replaying it through apply_op
//                  regenerates the outcome bit-identically
struct EditOutcome {
    DeltaSet edited;
    DeltaSet perturbation;
    nlohmann::json op_record;
    std::map<std::string, TensorEditMetrics> metrics;
};

enum class BiasOn { DeltaSign, ProductSign };
enum class ScaleDist { Normal, Uniform };

// Random drop and rescale, generalized: dropped entries scale by k, kept
// entries by (1 - k*p)/(1 - p). k = 0 is plain drop-and-rescale; k = 1 is
// the identity for every mask.
EditOutcome drop_rescale(const DeltaSet & delta, double p, double k, uint64_t seed);

// Same arithmetic with a caller-supplied mask (1 = dropped). p enters only
// the rescale factor, so (p = 0, k = 0) turns a fixed mask into the
// drop-only edit with no rescale.
EditOutcome drop_rescale_with_mask(const DeltaSet & delta, double p, double k,
                                   const BernoulliMask & mask);

// Magnitude-aware drop: rank entries ascending by |delta|; the entry at rank
// quantile q drops with probability p + window*(1 - 2q) and survivors are
// rescaled elementwise by 1/(1 - p_ij). window = 0 reduces to
// drop_rescale(p, k = 0) with the same seed.
EditOutcome magnitude_aware_drop(const DeltaSet & delta, double p, double window, uint64_t seed);

// Deterministic variant with no sampling: entries whose bias key (delta, or
// delta * gradient) is negative scale by k, the rest by (1 - k*p)/(1 - p).
// gradient is required for BiasOn::ProductSign.
EditOutcome sign_biased_scale(const DeltaSet & delta, double p, double k, BiasOn bias_on,
                              const NamedTensorMap * gradient = nullptr);

// 1-bit quantization: per tensor, AVG(|delta|) * Sign(delta), Sign(0) = +1.
EditOutcome bitdelta(const DeltaSet & delta);

// Same with the scalar multiplied by `factor`; factor = 1 reproduces
// bitdelta exactly.
EditOutcome bitdelta_perturbed_scale(const DeltaSet & delta, double factor);

// Magnitudes sampled around the per-tensor mean m: normal |N(m, (spread*m)^2)|
// or uniform U(m - spread*m, m + spread*m) clamped at 0. spread = 0
// reproduces bitdelta.
EditOutcome bitdelta_sampled_scale(const DeltaSet & delta, ScaleDist dist, double spread,
                                   uint64_t seed);

// Multi-bit blockwise quantization: entries sorted ascending by magnitude
// (ties by element index) are split into `blocks` contiguous equal-count
// blocks (larger blocks first); each entry's magnitude becomes its block's
// mean magnitude, sign preserved. blocks = 1 equals bitdelta; blocks >= numel
// reproduces the delta exactly. signed_mean switches the block representative
// to the signed mean, for comparison.
EditOutcome multibit(const DeltaSet & delta, size_t blocks, bool signed_mean = false);

// Truncated SVD keeping the `rank` largest singular values. Tensors of rank
// > 2 are folded to 2-D by flattening all but the first axis; rank-0/1
// tensors are rejected.
EditOutcome svd_truncate(const DeltaSet & delta, size_t rank);

// Keep the ceil(keep_fraction * numel) largest-magnitude entries per tensor
// (ties by element index), zero the rest. No rescaling.
EditOutcome ties_prune(const DeltaSet & delta, double keep_fraction);

// edited = (1 + alpha) * delta. alpha > 0 extrapolates, -1 < alpha < 0
// interpolates toward the pre-trained weights. alpha <= -1 erases or inverts
// the delta and needs the explicit override.
EditOutcome expo(const DeltaSet & delta, double alpha, bool allow_any_alpha = false);

// Replay an op_record. For ProductSign the gradient is an input, passed
// alongside the record.
EditOutcome apply_op(const DeltaSet & delta, const nlohmann::json & op_record,
                     const NamedTensorMap * gradient = nullptr);

} // namespace deltaforge::editors
