#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "deltaforge/tensor.hpp"

namespace deltaforge {

// Which tensors of a checkpoint pair are edit-eligible. The default is
// matrices-only (rank >= 2): weight matrices are edited, vectors such as
// biases ride along unedited at apply time.
struct TensorSelection {
    enum class Rule { All, MatricesOnly, Explicit };

    Rule rule = Rule::MatricesOnly;
    std::vector<std::string> names; // Explicit only

    // Resolved name set, sorted; every name must exist in both maps.
    // Throws MissingTensor for an explicit name absent from either side.
    std::vector<std::string> resolve(const NamedTensorMap & post, const NamedTensorMap & pre) const;

    // "all" | "matrices" | "list:a,b,c"
    std::string to_string() const;
    static TensorSelection parse(const std::string & text);
};

// Delta parameters: per selected tensor, post - pre. Carries provenance of
// the checkpoints that produced it.
struct DeltaSet {
    NamedTensorMap tensors;
    std::string source_pre;
    std::string source_post;
    TensorSelection selection;
};

// Bernoulli drop mask. Value 1.0 means dropped (the branch multiplied by 0
// or by k), 0.0 means kept. Regenerating with the same (shapes, p, seed) is
// bit-identical.
struct BernoulliMask {
    NamedTensorMap tensors;
    double p = 0.0;
    uint64_t seed = 0;
};

struct DeltaStats {
    double mean_abs = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
    size_t positive_count = 0;
    size_t negative_count = 0;
    size_t zero_count = 0;
};

DeltaSet compute_delta(const NamedTensorMap & post, const NamedTensorMap & pre,
                       const TensorSelection & selection);

// pre + edited delta for selected tensors; everything else copied through.
NamedTensorMap apply_delta(const NamedTensorMap & pre, const DeltaSet & edited);

BernoulliMask sample_mask(const std::map<std::string, std::vector<size_t>> & shapes,
                          double p, uint64_t seed);

// fp64 accumulation in canonical element order; mean_abs is the per-tensor
// average magnitude AVG(|delta|).
std::map<std::string, DeltaStats> delta_stats(const DeltaSet & delta);

// Serialization through checkpoint-io metadata.
NamedTensorMap delta_to_map(const DeltaSet & delta);
DeltaSet delta_from_map(const NamedTensorMap & map);

} // namespace deltaforge
