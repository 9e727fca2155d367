#pragma once

#include <cstdint>
#include <random>

namespace geest {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; a good bijective mixer for counter-derived seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Child seed for stream `counter` under `seed`. Independent of evaluation
/// order, so parallel and serial runs draw identical streams.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter) noexcept {
    return mix64(mix64(seed) ^ mix64(counter + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t counter) {
    return Rng(derive_seed(seed, counter));
}

/// Uniform integer in [0, n) without the libstdc++ distribution object, so
/// shuffles are reproducible across standard library implementations.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    // Lemire-style rejection on 64-bit draws.
    const std::uint64_t bound = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
}

inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <class It>
void shuffle(It first, It last, Rng& rng) {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = uniform_index(rng, i);
        std::swap(first[i - 1], first[j]);
    }
}

} // namespace geest
