#include "deltaforge/riemann.hpp"

#include <cmath>

namespace deltaforge::riemann {

using nlohmann::json;
using probe::ParamsF64;
using probe::ProbeDataset;
using probe::ProbeSpec;

json RiemannEstimate::to_json(const json & op_record) const {
    json j;
    j["value"] = value;
    j["exact"] = exact ? json(*exact) : json(nullptr);
    j["C"] = C;
    j["sample_points"] = sample_points;
    j["terms"] = terms;
    j["op_record"] = op_record;
    return j;
}

double frobenius_inner(const NamedTensorMap & a, const NamedTensorMap & b) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::ShapeMismatch, "maps hold different tensor counts");
    }
    double total = 0.0;
    for (const auto & [name, ta] : a.entries) {
        if (!b.contains(name)) {
            throw Error(ErrorKind::MissingTensor, "'" + name + "' absent from second map");
        }
        const Tensor & tb = b.at(name);
        if (!ta.same_shape(tb)) {
            throw Error(ErrorKind::ShapeMismatch, "'" + name + "' shapes differ");
        }
        for (size_t i = 0; i < ta.values.size(); i++) {
            total += double(ta.values[i]) * double(tb.values[i]);
        }
    }
    return total;
}

namespace {

// fp64 perturbation restricted to the parameter layout; names outside the
// layout are rejected, uncovered names get zero vectors.
ParamsF64 widen_perturbation(const ParamsF64 & params, const DeltaSet & perturbation) {
    ParamsF64 out;
    for (const auto & [name, values] : params) {
        out.emplace(name, std::vector<double>(values.size(), 0.0));
    }
    for (const auto & [name, tensor] : perturbation.tensors.entries) {
        auto it = out.find(name);
        if (it == out.end()) {
            throw Error(ErrorKind::LayoutMismatch,
                        "perturbation tensor '" + name + "' is not a probe parameter");
        }
        if (tensor.values.size() != it->second.size()) {
            throw Error(ErrorKind::LayoutMismatch,
                        "perturbation tensor '" + name + "' has wrong size");
        }
        for (size_t i = 0; i < tensor.values.size(); i++) {
            it->second[i] = tensor.values[i];
        }
    }
    return out;
}

ParamsF64 offset(const ParamsF64 & base, const ParamsF64 & direction, double t) {
    ParamsF64 out = base;
    for (auto & [name, values] : out) {
        const std::vector<double> & d = direction.at(name);
        for (size_t i = 0; i < values.size(); i++) {
            values[i] += t * d[i];
        }
    }
    return out;
}

double inner_f64(const ParamsF64 & a, const ParamsF64 & b) {
    double total = 0.0;
    for (const auto & [name, values] : a) {
        const std::vector<double> & bv = b.at(name);
        for (size_t i = 0; i < values.size(); i++) {
            total += values[i] * bv[i];
        }
    }
    return total;
}

} // namespace

RiemannEstimate estimate_delta_loss(const ProbeSpec & spec, const ProbeDataset & data,
                                    const NamedTensorMap & w_post, const DeltaSet & perturbation,
                                    int C, bool include_left_endpoint) {
    if (C < 1 || (!include_left_endpoint && C < 2)) {
        throw Error(ErrorKind::InvalidC,
                    "C = " + std::to_string(C) + " leaves no sample points");
    }
    const ParamsF64 base = probe::widen(spec, w_post);
    const ParamsF64 direction = widen_perturbation(base, perturbation);

    RiemannEstimate est;
    est.C = C;
    for (int c = include_left_endpoint ? 0 : 1; c < C; c++) {
        est.sample_points.push_back(double(c) / double(C));
    }
    double total = 0.0;
    for (double t : est.sample_points) {
        const ParamsF64 g = probe::grad_f64(spec, offset(base, direction, t), data);
        const double term = inner_f64(g, direction);
        est.terms.push_back(term);
        total += term;
    }
    est.value = total / double(est.terms.size());
    return est;
}

double exact_delta_loss(const ProbeSpec & spec, const ProbeDataset & data,
                        const NamedTensorMap & w_post, const DeltaSet & perturbation) {
    const ParamsF64 base = probe::widen(spec, w_post);
    const ParamsF64 direction = widen_perturbation(base, perturbation);
    return probe::loss_f64(spec, offset(base, direction, 1.0), data) -
           probe::loss_f64(spec, base, data);
}

} // namespace deltaforge::riemann
