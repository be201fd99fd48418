#include "deltaforge/checkpoint_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

namespace deltaforge {

using nlohmann::json;

float f16_to_f32(uint16_t bits) {
    uint32_t sign = uint32_t(bits & 0x8000u) << 16;
    uint32_t exp = (bits >> 10) & 0x1Fu;
    uint32_t mant = bits & 0x3FFu;
    uint32_t out;
    if (exp == 0) {
        if (mant == 0) {
            out = sign;
        } else {
            // subnormal: renormalize into the fp32 exponent range
            int shift = 0;
            uint32_t m = mant;
            while (!(m & 0x400u)) {
                m <<= 1;
                shift++;
            }
            out = sign | uint32_t(127 - 14 - shift) << 23 | (m & 0x3FFu) << 13;
        }
    } else if (exp == 31) {
        out = sign | 0x7F800000u | mant << 13;
    } else {
        out = sign | (exp - 15 + 127) << 23 | mant << 13;
    }
    return std::bit_cast<float>(out);
}

float bf16_to_f32(uint16_t bits) {
    return std::bit_cast<float>(uint32_t(bits) << 16);
}

namespace {

enum class Dtype { F32, F16, BF16 };

size_t dtype_size(Dtype d) {
    return d == Dtype::F32 ? 4 : 2;
}

Dtype parse_dtype(const std::string & text) {
    if (text == "F32") {
        return Dtype::F32;
    }
    if (text == "F16") {
        return Dtype::F16;
    }
    if (text == "BF16") {
        return Dtype::BF16;
    }
    throw Error(ErrorKind::UnsupportedDtype, "dtype '" + text + "'");
}

struct HeaderEntry {
    std::string name;
    Dtype dtype;
    std::vector<size_t> shape;
    size_t begin;
    size_t end;
};

[[noreturn]] void malformed(const std::string & what) {
    throw Error(ErrorKind::MalformedHeader, what);
}

} // namespace

NamedTensorMap load_checkpoint(const std::string & path, bool permissive) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw Error(ErrorKind::IoError, "cannot open '" + path + "' for reading");
    }
    std::vector<char> bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    if (file.bad()) {
        throw Error(ErrorKind::IoError, "read failure on '" + path + "'");
    }

    if (bytes.size() < 8) {
        malformed("file shorter than the 8-byte header length field");
    }
    uint64_t header_len;
    std::memcpy(&header_len, bytes.data(), 8);
    if (header_len > bytes.size() - 8) {
        malformed("header length " + std::to_string(header_len) + " exceeds file size");
    }

    json header;
    try {
        header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + ptrdiff_t(header_len));
    } catch (const json::parse_error & e) {
        malformed(std::string("header is not valid JSON: ") + e.what());
    }
    if (!header.is_object()) {
        malformed("header is not a JSON object");
    }

    const char * buffer = bytes.data() + 8 + header_len;
    const size_t buffer_size = bytes.size() - 8 - size_t(header_len);

    NamedTensorMap result;
    std::vector<HeaderEntry> entries;

    for (const auto & [key, value] : header.items()) {
        if (key == "__metadata__") {
            if (!value.is_object()) {
                malformed("__metadata__ is not an object");
            }
            for (const auto & [mk, mv] : value.items()) {
                if (!mv.is_string()) {
                    malformed("__metadata__ value for '" + mk + "' is not a string");
                }
                result.metadata[mk] = mv.get<std::string>();
            }
            continue;
        }
        if (!value.is_object() || !value.contains("dtype") || !value.contains("shape") ||
            !value.contains("data_offsets")) {
            malformed("tensor '" + key + "' entry is missing dtype/shape/data_offsets");
        }
        if (!value["dtype"].is_string()) {
            malformed("tensor '" + key + "' dtype is not a string");
        }
        HeaderEntry entry;
        entry.name = key;
        entry.dtype = parse_dtype(value["dtype"].get<std::string>());
        if (!value["shape"].is_array()) {
            malformed("tensor '" + key + "' shape is not an array");
        }
        size_t numel = 1;
        for (const auto & dim : value["shape"]) {
            if (!dim.is_number_unsigned()) {
                malformed("tensor '" + key + "' has a negative or non-integer dimension");
            }
            size_t d = dim.get<size_t>();
            if (d != 0 && numel > SIZE_MAX / d) {
                malformed("tensor '" + key + "' shape product overflows");
            }
            numel *= d;
            entry.shape.push_back(d);
        }
        const auto & offsets = value["data_offsets"];
        if (!offsets.is_array() || offsets.size() != 2 || !offsets[0].is_number_unsigned() ||
            !offsets[1].is_number_unsigned()) {
            malformed("tensor '" + key + "' data_offsets is not a [begin, end] pair");
        }
        entry.begin = offsets[0].get<size_t>();
        entry.end = offsets[1].get<size_t>();
        if (entry.begin > entry.end || entry.end > buffer_size) {
            malformed("tensor '" + key + "' offsets [" + std::to_string(entry.begin) + ", " +
                      std::to_string(entry.end) + ") fall outside the data buffer");
        }
        if (entry.end - entry.begin != numel * dtype_size(entry.dtype)) {
            malformed("tensor '" + key + "' byte span does not match shape and dtype");
        }
        entries.push_back(std::move(entry));
    }

    // Offsets must tile the buffer: contiguous, non-overlapping, starting at 0.
    std::vector<std::pair<size_t, size_t>> spans;
    spans.reserve(entries.size());
    for (const auto & e : entries) {
        spans.emplace_back(e.begin, e.end);
    }
    std::sort(spans.begin(), spans.end());
    size_t cursor = 0;
    for (const auto & [begin, end] : spans) {
        if (begin != cursor) {
            malformed(begin < cursor ? "tensor data offsets overlap" : "gap in tensor data offsets");
        }
        cursor = end;
    }
    if (cursor != buffer_size) {
        malformed("tensor data does not cover the data buffer (" + std::to_string(cursor) + " of " +
                  std::to_string(buffer_size) + " bytes)");
    }

    for (const auto & entry : entries) {
        Tensor tensor;
        tensor.shape = entry.shape;
        const size_t numel = tensor.numel();
        tensor.values.resize(numel);
        const char * src = buffer + entry.begin;
        switch (entry.dtype) {
            case Dtype::F32:
                std::memcpy(tensor.values.data(), src, numel * 4);
                break;
            case Dtype::F16:
                for (size_t i = 0; i < numel; i++) {
                    uint16_t half;
                    std::memcpy(&half, src + 2 * i, 2);
                    tensor.values[i] = f16_to_f32(half);
                }
                break;
            case Dtype::BF16:
                for (size_t i = 0; i < numel; i++) {
                    uint16_t half;
                    std::memcpy(&half, src + 2 * i, 2);
                    tensor.values[i] = bf16_to_f32(half);
                }
                break;
        }
        if (!permissive) {
            for (size_t i = 0; i < numel; i++) {
                if (!std::isfinite(tensor.values[i])) {
                    throw Error(ErrorKind::NonFiniteValue,
                                "tensor '" + entry.name + "' element " + std::to_string(i));
                }
            }
        }
        result.entries.emplace(entry.name, std::move(tensor));
    }
    return result;
}

void save_checkpoint(const NamedTensorMap & map, const std::string & path) {
    for (const auto & [name, tensor] : map.entries) {
        validate_tensor(name, tensor);
        if (name == "__metadata__") {
            throw Error(ErrorKind::InvalidTensor, "'__metadata__' is reserved and cannot name a tensor");
        }
    }

    json header = json::object();
    size_t cursor = 0;
    for (const auto & [name, tensor] : map.entries) {
        const size_t bytes = tensor.numel() * 4;
        header[name] = {
            {"data_offsets", {cursor, cursor + bytes}},
            {"dtype", "F32"},
            {"shape", tensor.shape},
        };
        cursor += bytes;
    }
    if (!map.metadata.empty()) {
        header["__metadata__"] = map.metadata;
    }
    const std::string header_text = header.dump();

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) {
        throw Error(ErrorKind::IoError, "cannot open '" + path + "' for writing");
    }
    const uint64_t header_len = header_text.size();
    file.write(reinterpret_cast<const char *>(&header_len), 8);
    file.write(header_text.data(), ptrdiff_t(header_text.size()));
    for (const auto & [name, tensor] : map.entries) {
        file.write(reinterpret_cast<const char *>(tensor.values.data()),
                   ptrdiff_t(tensor.values.size() * 4));
    }
    file.flush();
    if (!file) {
        throw Error(ErrorKind::IoError, "write failure on '" + path + "'");
    }
}

} // namespace deltaforge
