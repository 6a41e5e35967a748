#pragma once

#include <cstdint>
#include <random>

namespace simba {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Independent stream seed for (master, stream) pairs.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    return derive_seed(derive_seed(master, a), b);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

template <typename Scalar>
Scalar std_normal(Rng& rng) {
    return std::normal_distribution<Scalar>(Scalar(0), Scalar(1))(rng);
}

// IG(shape, rate) drawn as rate / Gamma(shape, 1).
template <typename Scalar>
Scalar inv_gamma(Rng& rng, Scalar shape, Scalar rate) {
    return rate / std::gamma_distribution<Scalar>(shape, Scalar(1))(rng);
}

} // namespace simba
