// Seeded randomness utilities. Every stochastic component in the library draws
// from an mt19937_64 whose seed is derived from a user-facing base seed plus a
// documented list of salts, so independent streams (per tree, per trajectory,
// per evaluation cell) never share state and re-runs are bit-identical.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace lcroll {

using Rng = std::mt19937_64;

// splitmix64 finalizer; full-avalanche 64-bit mix.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// FNV-1a over the raw bytes of a string salt.
inline std::uint64_t hash_bytes(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    return mix64(base ^ mix64(salt));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view salt) {
    return derive_seed(base, hash_bytes(salt));
}

template <typename First, typename Second, typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, First first, Second second, Rest... rest) {
    return derive_seed(derive_seed(base, first), second, rest...);
}

// Uniform double in [0, 1) with 53 random bits. Hand-rolled (rather than
// std::uniform_real_distribution) so the value sequence is pinned by the
// engine alone, not by the standard library's distribution internals.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// Unbiased integer in [0, n) via rejection sampling. n must be positive.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
        const std::uint64_t r = rng();
        if (r >= threshold) return r % n;
    }
}

// Standard normal via Box-Muller. Stateless on purpose: no cached spare, so
// draw sequences depend only on the engine state.
inline double normal01(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);  // log(0) guard
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double normal(Rng& rng, double mean, double stddev) {
    return mean + stddev * normal01(rng);
}

// Fisher-Yates shuffle driven by uniform_below; deterministic per engine state.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace lcroll
