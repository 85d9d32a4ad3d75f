#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace tdep {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Mixes a master seed with stream coordinates (cell, replication, ...) into
/// one 64-bit stream key. Distinct coordinate tuples give unrelated streams.
inline constexpr std::uint64_t stream_key(std::uint64_t seed,
                                          std::initializer_list<std::uint64_t> coords) noexcept {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t c : coords) h = splitmix64(h ^ splitmix64(c + 0x632BE59BD9B4E019ULL));
    return h;
}

/// xoshiro256** seeded through splitmix64. Small, fast, and bit-reproducible
/// on every platform, unlike the std:: distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept {
        std::uint64_t x = seed;
        for (auto& s : s_) {
            x += 0x9E3779B97F4A7C15ULL;
            s = splitmix64(x);
        }
    }

    /// Independent stream for (seed, coords...).
    static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) noexcept {
        return Rng(stream_key(seed, coords));
    }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on the open interval (0,1).
    double uniform() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard normal by inversion.
    double normal() noexcept {
        const double p = uniform();
        return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
    }

    double exponential() noexcept { return -std::log(uniform()); }

    /// Gamma(shape, 1): Marsaglia-Tsang, with the U^{1/shape} boost for shape < 1.
    double gamma(double shape) noexcept {
        if (shape < 1.0) {
            const double g = gamma(shape + 1.0);
            return g * std::pow(uniform(), 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = 0.0;
            double t = 0.0;
            do {
                x = normal();
                t = 1.0 + c * x;
            } while (t <= 0.0);
            t = t * t * t;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * t;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - t + std::log(t))) return d * t;
        }
    }

    double chi_square(double dof) noexcept { return 2.0 * gamma(0.5 * dof); }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4]{};
};

}  // namespace tdep
