#pragma once

// Portable random streams. std::mt19937_64 is fully specified by the
// standard, but the std distributions are not, so uniform and normal
// variates are derived here from the raw engine output.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace gridfm {

/// SplitMix64 finalizer applied to (seed, stream): independent sub-seeds
/// for scenario i of a master seed.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t bits() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal by Box-Muller (one variate per call).
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// exp(sigma * N(0, 1)); exactly 1 when sigma is 0.
    double lognormal(double sigma) { return sigma == 0.0 ? (normal(), 1.0) : std::exp(sigma * normal()); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n) without modulo bias; n must be positive.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace gridfm
