#include "deltaforge/tensor.hpp"

namespace deltaforge {

void validate_tensor(const std::string & name, const Tensor & t) {
    if (t.values.size() != t.numel()) {
        throw Error(ErrorKind::InvalidTensor,
                    "tensor '" + name + "' has " + std::to_string(t.values.size()) +
                        " values but its shape implies " + std::to_string(t.numel()));
    }
}

const Tensor & NamedTensorMap::at(const std::string & name) const {
    auto it = entries.find(name);
    if (it == entries.end()) {
        throw Error(ErrorKind::MissingTensor, "no tensor named '" + name + "'");
    }
    return it->second;
}

std::map<std::string, std::vector<size_t>> shapes_of(const NamedTensorMap & map) {
    std::map<std::string, std::vector<size_t>> shapes;
    for (const auto & [name, tensor] : map.entries) {
        shapes[name] = tensor.shape;
    }
    return shapes;
}

} // namespace deltaforge
