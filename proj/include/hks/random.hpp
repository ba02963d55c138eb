#pragma once

// Counter-based randomness keyed by (run seed, document id), so every draw is
// independent of processing order and worker count.

#include <cmath>
#include <cstdint>
#include <string_view>

namespace hks::random {

inline constexpr uint64_t splitmix64(uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline constexpr uint64_t fnv1a64(std::string_view s) noexcept {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (char ch : s) {
        h ^= static_cast<uint8_t>(ch);
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// 64 random bits for (seed, id, stream).
inline constexpr uint64_t keyed_bits(uint64_t seed, std::string_view id, uint64_t stream = 0) noexcept {
    return splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ fnv1a64(id));
}

/// Uniform in the open interval (0, 1).
inline double keyed_uniform(uint64_t seed, std::string_view id, uint64_t stream = 0) noexcept {
    const uint64_t bits = keyed_bits(seed, id, stream) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

/// Standard Gumbel(0, 1) draw.
inline double keyed_gumbel(uint64_t seed, std::string_view id, uint64_t stream = 0) noexcept {
    return -std::log(-std::log(keyed_uniform(seed, id, stream)));
}

}  // namespace hks::random
