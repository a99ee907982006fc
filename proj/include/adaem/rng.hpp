#pragma once

#include <cstdint>
#include <random>

namespace adaem {

// splitmix64 step. Used to derive independent stream seeds from one master
// seed so that adding a consumer (say, a new policy) never shifts the random
// numbers seen by existing ones.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic sub-seed: hash (seed, stream_id) down to one 64-bit value.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s ^= stream_id * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL;
    std::uint64_t b = splitmix64(s);
    return a ^ (b + 0x9e3779b97f4a7c15ULL);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream_id) {
    return std::mt19937_64(derive_seed(seed, stream_id));
}

} // namespace adaem
