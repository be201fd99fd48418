#include "deltaforge/delta.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "deltaforge/rng.hpp"

namespace deltaforge {

std::vector<std::string> TensorSelection::resolve(const NamedTensorMap & post,
                                                  const NamedTensorMap & pre) const {
    std::vector<std::string> resolved;
    switch (rule) {
        case Rule::All:
            for (const auto & [name, tensor] : post.entries) {
                resolved.push_back(name);
            }
            break;
        case Rule::MatricesOnly:
            for (const auto & [name, tensor] : post.entries) {
                if (tensor.rank() >= 2) {
                    resolved.push_back(name);
                }
            }
            break;
        case Rule::Explicit: {
            resolved = names;
            std::sort(resolved.begin(), resolved.end());
            resolved.erase(std::unique(resolved.begin(), resolved.end()), resolved.end());
            for (const auto & name : resolved) {
                if (!post.contains(name)) {
                    throw Error(ErrorKind::MissingTensor, "'" + name + "' absent from post checkpoint");
                }
            }
            break;
        }
    }
    for (const auto & name : resolved) {
        if (!pre.contains(name)) {
            throw Error(ErrorKind::MissingTensor, "'" + name + "' absent from pre checkpoint");
        }
    }
    return resolved;
}

std::string TensorSelection::to_string() const {
    switch (rule) {
        case Rule::All:
            return "all";
        case Rule::MatricesOnly:
            return "matrices";
        case Rule::Explicit: {
            std::string text = "list:";
            for (size_t i = 0; i < names.size(); i++) {
                if (i) {
                    text += ',';
                }
                text += names[i];
            }
            return text;
        }
    }
    return "matrices";
}

TensorSelection TensorSelection::parse(const std::string & text) {
    TensorSelection selection;
    if (text == "all") {
        selection.rule = Rule::All;
        return selection;
    }
    if (text == "matrices") {
        selection.rule = Rule::MatricesOnly;
        return selection;
    }
    if (text.rfind("list:", 0) == 0) {
        selection.rule = Rule::Explicit;
        std::stringstream stream(text.substr(5));
        std::string name;
        while (std::getline(stream, name, ',')) {
            if (!name.empty()) {
                selection.names.push_back(name);
            }
        }
        if (selection.names.empty()) {
            throw Error(ErrorKind::InvalidConfig, "empty tensor list in selection '" + text + "'");
        }
        return selection;
    }
    throw Error(ErrorKind::InvalidConfig,
                "selection '" + text + "' is not all | matrices | list:<names>");
}

DeltaSet compute_delta(const NamedTensorMap & post, const NamedTensorMap & pre,
                       const TensorSelection & selection) {
    DeltaSet delta;
    delta.selection = selection;
    for (const auto & name : selection.resolve(post, pre)) {
        const Tensor & a = post.at(name);
        const Tensor & b = pre.at(name);
        if (!a.same_shape(b)) {
            throw Error(ErrorKind::ShapeMismatch, "'" + name + "' differs between pre and post");
        }
        Tensor out;
        out.shape = a.shape;
        out.values.resize(a.values.size());
        for (size_t i = 0; i < a.values.size(); i++) {
            out.values[i] = a.values[i] - b.values[i];
            if (!std::isfinite(out.values[i])) {
                throw Error(ErrorKind::NonFiniteValue,
                            "'" + name + "' element " + std::to_string(i) + " overflows");
            }
        }
        delta.tensors.entries.emplace(name, std::move(out));
    }
    return delta;
}

NamedTensorMap apply_delta(const NamedTensorMap & pre, const DeltaSet & edited) {
    for (const auto & [name, tensor] : edited.tensors.entries) {
        if (!pre.contains(name)) {
            throw Error(ErrorKind::MissingTensor, "'" + name + "' absent from pre checkpoint");
        }
    }
    NamedTensorMap out;
    out.metadata = pre.metadata;
    for (const auto & [name, tensor] : pre.entries) {
        Tensor merged = tensor;
        auto it = edited.tensors.entries.find(name);
        if (it != edited.tensors.entries.end()) {
            if (!merged.same_shape(it->second)) {
                throw Error(ErrorKind::ShapeMismatch, "'" + name + "' differs between pre and delta");
            }
            for (size_t i = 0; i < merged.values.size(); i++) {
                merged.values[i] += it->second.values[i];
                if (!std::isfinite(merged.values[i])) {
                    throw Error(ErrorKind::NonFiniteValue,
                                "'" + name + "' element " + std::to_string(i) + " overflows");
                }
            }
        }
        out.entries.emplace(name, std::move(merged));
    }
    return out;
}

BernoulliMask sample_mask(const std::map<std::string, std::vector<size_t>> & shapes,
                          double p, uint64_t seed) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw Error(ErrorKind::InvalidRate, "drop rate " + std::to_string(p) + " outside [0, 1)");
    }
    BernoulliMask mask;
    mask.p = p;
    mask.seed = seed;
    for (const auto & [name, shape] : shapes) {
        Tensor tensor;
        tensor.shape = shape;
        tensor.values.resize(tensor.numel());
        const uint64_t key = stream_key(seed, name);
        for (size_t i = 0; i < tensor.values.size(); i++) {
            tensor.values[i] = uniform_at(key, i) < p ? 1.0f : 0.0f;
        }
        mask.tensors.entries.emplace(name, std::move(tensor));
    }
    return mask;
}

std::map<std::string, DeltaStats> delta_stats(const DeltaSet & delta) {
    std::map<std::string, DeltaStats> stats;
    for (const auto & [name, tensor] : delta.tensors.entries) {
        DeltaStats s;
        double sum_sq = 0.0;
        for (float v : tensor.values) {
            s.l1 += std::fabs(double(v));
            sum_sq += double(v) * double(v);
            if (v > 0.0f) {
                s.positive_count++;
            } else if (v < 0.0f) {
                s.negative_count++;
            } else {
                s.zero_count++;
            }
        }
        s.l2 = std::sqrt(sum_sq);
        s.mean_abs = tensor.values.empty() ? 0.0 : s.l1 / double(tensor.values.size());
        stats.emplace(name, s);
    }
    return stats;
}

NamedTensorMap delta_to_map(const DeltaSet & delta) {
    NamedTensorMap map;
    map.entries = delta.tensors.entries;
    map.metadata["source_pre"] = delta.source_pre;
    map.metadata["source_post"] = delta.source_post;
    map.metadata["selection"] = delta.selection.to_string();
    return map;
}

DeltaSet delta_from_map(const NamedTensorMap & map) {
    DeltaSet delta;
    delta.tensors.entries = map.entries;
    auto pick = [&](const char * key) -> std::string {
        auto it = map.metadata.find(key);
        return it == map.metadata.end() ? std::string() : it->second;
    };
    delta.source_pre = pick("source_pre");
    delta.source_post = pick("source_post");
    auto sel = map.metadata.find("selection");
    if (sel != map.metadata.end()) {
        delta.selection = TensorSelection::parse(sel->second);
    } else {
        delta.selection.rule = TensorSelection::Rule::Explicit;
        for (const auto & [name, tensor] : map.entries) {
            delta.selection.names.push_back(name);
        }
    }
    return delta;
}

} // namespace deltaforge
