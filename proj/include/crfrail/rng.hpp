#pragma once

#include <cstdint>
#include <random>

namespace crfrail {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent sub-seeds from a master seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed for substream `index` of `master`. Stable across runs and thread counts.
constexpr std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix_seed(mix_seed(master) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_substream(std::uint64_t master, std::uint64_t index) {
    return Rng(substream_seed(master, index));
}

// Uniform draw strictly inside (0, 1).
inline double open_uniform(Rng& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace crfrail
