#pragma once

#include <cstdint>
#include <string>

#include "deltaforge/tensor.hpp"

namespace deltaforge {

// safetensors container:
//   [8-byte little-endian u64 header length N]
//   [N bytes JSON: name -> {"dtype", "shape", "data_offsets"}, optional "__metadata__"]
//   [raw little-endian tensor buffer]
// Offsets are relative to the buffer start and must be contiguous and
// non-overlapping. Supported dtypes on disk: F32, F16, BF16; everything is
// widened to fp32 on load and written back as F32.

// Throws MalformedHeader, UnsupportedDtype, IoError; NonFiniteValue unless
// permissive is set.
NamedTensorMap load_checkpoint(const std::string & path, bool permissive = false);

// Writes F32 tensors in lexicographic name order with a minimal JSON header.
// Saving the same map twice yields byte-identical files.
void save_checkpoint(const NamedTensorMap & map, const std::string & path);

// Exact IEEE-754 widening of the 16-bit formats.
float f16_to_f32(uint16_t bits);
float bf16_to_f32(uint16_t bits);

} // namespace deltaforge
