#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace deltaforge {

// Counter-based random numbers. Each draw is a pure function of
// (stream key, element index), so masks and sampled matrices are
// reproducible regardless of evaluation order or thread count, and
// adding a tensor never shifts another tensor's stream.

// splitmix64 output function (Steele, Lea, Flood 2014).
inline uint64_t mix64(uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

// The i-th output of splitmix64 seeded with `key`, evaluated directly.
inline uint64_t word_at(uint64_t key, uint64_t index) {
    return mix64(key + (index + 1) * 0x9E3779B97F4A7C15ull);
}

// FNV-1a over the name, mixed with the user seed. Distinct tensor names
// yield statistically independent substreams.
inline uint64_t stream_key(uint64_t seed, std::string_view name) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return mix64(seed ^ mix64(h));
}

// Uniform in [0, 1), 53 random bits.
inline double uniform_at(uint64_t key, uint64_t index) {
    return double(word_at(key, index) >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller; consumes indices 2i and 2i+1.
inline double normal_at(uint64_t key, uint64_t index) {
    // u1 in (0, 1] so the log is finite.
    double u1 = double((word_at(key, 2 * index) >> 11) + 1) * 0x1.0p-53;
    double u2 = double(word_at(key, 2 * index + 1) >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

} // namespace deltaforge
