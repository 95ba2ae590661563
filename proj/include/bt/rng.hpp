#pragma once

// Seeded random streams. Every draw goes through Rng::uniform() and inverse
// CDFs so that streams are reproducible across standard libraries.

#include <boost/math/distributions/normal.hpp>

#include <cstdint>
#include <random>

namespace bt {

/// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for the `index`-th child stream of `seed`, optionally salted by a purpose tag.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t salt = 0) noexcept {
    return mix64(mix64(seed ^ mix64(salt)) + index);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

    /// Uniform on the open interval (0, 1) with 53 bits of resolution.
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal(double mean = 0.0, double sd = 1.0) {
        if (sd == 0.0) {
            return mean;
        }
        return mean + sd * standard_normal_quantile(uniform());
    }

    /// Index in [0, n).
    std::size_t below(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
    }

    static double standard_normal_quantile(double u) {
        static const boost::math::normal_distribution<double> unit{};
        return boost::math::quantile(unit, u);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace bt
