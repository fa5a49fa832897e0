#pragma once

#include <cstdint>
#include <random>

namespace mute {

/// splitmix64 step; used to derive independent sub-seeds from a master seed
/// so that concurrent consumers (restarts, per-sample noise) never share
/// stream state.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Sub-seed for stream `index` of master seed `seed`.
inline std::uint64_t subseed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(index + 1));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
    return std::mt19937_64{seed};
}

} // namespace mute
