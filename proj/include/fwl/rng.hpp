#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fwl {

/// splitmix64 step; good enough to whiten seeds and hash small keys.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derives an independent stream seed from a base seed and a purpose tag.
/// Same (base, tag) always yields the same seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    return splitmix64(base ^ fnv1a64(tag));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index) {
    return splitmix64(derive_seed(base, tag) ^ splitmix64(index));
}

/// Maps a 64-bit hash to a double in [0, 1).
inline double hash_to_unit(std::uint64_t h) {
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(splitmix64(seed)); }

}  // namespace fwl
