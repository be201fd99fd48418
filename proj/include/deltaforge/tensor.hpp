#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "deltaforge/errors.hpp"

namespace deltaforge {

// Dense row-major fp32 tensor. An empty shape denotes a scalar of length 1.
struct Tensor {
    std::vector<size_t> shape;
    std::vector<float> values;

    Tensor() = default;
    Tensor(std::vector<size_t> shape_, std::vector<float> values_)
        : shape(std::move(shape_)), values(std::move(values_)) {}

    size_t numel() const {
        size_t n = 1;
        for (size_t d : shape) {
            n *= d;
        }
        return n;
    }

    // Tensors of rank >= 2 are the "matrices" the editing operators target.
    size_t rank() const { return shape.size(); }

    bool same_shape(const Tensor & other) const { return shape == other.shape; }
};

// Throws InvalidTensor if values.size() does not match the shape product.
void validate_tensor(const std::string & name, const Tensor & t);

// Ordered collection of named tensors. std::map keeps iteration in
// lexicographic name order, which is the canonical order for every
// reduction in this library.
struct NamedTensorMap {
    std::map<std::string, Tensor> entries;
    std::map<std::string, std::string> metadata;

    bool contains(const std::string & name) const { return entries.count(name) != 0; }

    const Tensor & at(const std::string & name) const;

    size_t size() const { return entries.size(); }
};

// name -> shape, in canonical order.
std::map<std::string, std::vector<size_t>> shapes_of(const NamedTensorMap & map);

} // namespace deltaforge
