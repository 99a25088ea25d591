#pragma once

#include <cstdint>
#include <random>

namespace choicenet {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; mixes a base seed with a stream index so that
/// per-repetition and per-row substreams are independent of execution order.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Uniform draw on the open interval (0,1).
inline double uniform_open(Rng& rng) {
    // 53-bit mantissa draw shifted off both endpoints
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace choicenet
