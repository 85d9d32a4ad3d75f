#pragma once

// Reproducible draws from the analytic copula families and the skew-t copula.

#include <cmath>
#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "tdep/analytic_models.hpp"
#include "tdep/error.hpp"
#include "tdep/normal.hpp"
#include "tdep/rng.hpp"
#include "tdep/skew_t.hpp"

namespace tdep {

using Generator = std::variant<CopulaModel, SkewTParams>;

struct SimulationConfig {
    Generator generator = CopulaModel::independence();
    std::size_t n = 0;
    std::uint64_t seed = 0;
};

/// Columnar (u, v) sample on (0,1)^2.
struct PairSample {
    std::vector<double> u;
    std::vector<double> v;

    std::size_t size() const noexcept { return u.size(); }
};

/// (max(u1^{1/(1-delta)}, u2^{1/delta}), v) for delta strictly inside (0,1).
inline std::pair<double, double> khoudraji_pair(double u1, double u2, double v, double delta) {
    require(delta > 0.0 && delta < 1.0, "khoudraji_pair: delta must lie strictly inside (0,1)");
    return {std::max(std::pow(u1, 1.0 / (1.0 - delta)), std::pow(u2, 1.0 / delta)), v};
}

namespace detail {

inline std::pair<double, double> draw_pair(const CopulaModel& m, Rng& rng) {
    const double t = m.parameter();
    switch (m.family()) {
        case Family::independence: {
            const double u = rng.uniform();
            return {u, rng.uniform()};
        }
        case Family::comonotone: {
            const double u = rng.uniform();
            return {u, u};
        }
        case Family::countermonotone: {
            const double u = rng.uniform();
            return {u, 1.0 - u};
        }
        case Family::gaussian: {
            const double z1 = rng.normal();
            const double z2 = rng.normal();
            return {normal::cdf(z1), normal::cdf(t * z1 + std::sqrt(1.0 - t * t) * z2)};
        }
        case Family::clayton: {
            // Marshall-Olkin: frailty V ~ Gamma(1/theta), U_i = (1 + E_i / V)^{-1/theta}.
            const double frailty = rng.gamma(1.0 / t);
            const double e1 = rng.exponential();
            const double e2 = rng.exponential();
            return {std::pow(1.0 + e1 / frailty, -1.0 / t), std::pow(1.0 + e2 / frailty, -1.0 / t)};
        }
        case Family::frank: {
            const double u = rng.uniform();
            const double w = rng.uniform();
            const double a = std::exp(-t * u);
            const double b = w * std::expm1(-t) / (w + a * (1.0 - w));
            return {u, -std::log1p(b) / t};
        }
        case Family::fgm: {
            const double u = rng.uniform();
            const double w = rng.uniform();
            const double a = t * (1.0 - 2.0 * u);
            const double v = 2.0 * w / (1.0 + a + std::sqrt((1.0 + a) * (1.0 + a) - 4.0 * a * w));
            return {u, v};
        }
        case Family::khoudraji: {
            const auto [u1, v] = draw_pair(m.base(), rng);
            const double u2 = rng.uniform();
            if (t <= 0.0) return {u1, v};
            if (t >= 1.0) return {u2, v};
            return khoudraji_pair(u1, u2, v, t);
        }
    }
    return {0.5, 0.5};
}

}  // namespace detail

/// Draws n pairs from `generator` using `rng`.
inline PairSample sample(const Generator& generator, std::size_t n, Rng& rng) {
    PairSample out;
    out.u.resize(n);
    out.v.resize(n);
    if (const auto* m = std::get_if<CopulaModel>(&generator)) {
        for (std::size_t i = 0; i < n; ++i) std::tie(out.u[i], out.v[i]) = detail::draw_pair(*m, rng);
    } else {
        const SkewTCopula st(std::get<SkewTParams>(generator));
        for (std::size_t i = 0; i < n; ++i) {
            const auto uv = st.draw_uniform(rng);
            out.u[i] = uv[0];
            out.v[i] = uv[1];
        }
    }
    return out;
}

inline PairSample sample(const SimulationConfig& config) {
    require(config.n >= 1, "sample: n must be >= 1");
    Rng rng(config.seed);
    return sample(config.generator, config.n, rng);
}

/// Skew-t copula sample: draws on the original scale mapped through the
/// tabulated marginal distribution functions.
inline PairSample skew_t_sample(double rho, double alpha1, double alpha2, double nu, std::size_t n,
                                std::uint64_t seed) {
    return sample(SimulationConfig{SkewTParams{rho, alpha1, alpha2, nu}, n, seed});
}

inline std::string generator_name(const Generator& g) {
    if (const auto* m = std::get_if<CopulaModel>(&g)) return m->name();
    const auto& p = std::get<SkewTParams>(g);
    char buf[128];
    std::snprintf(buf, sizeof buf, "skew_t(rho=%g,alpha1=%g,alpha2=%g,nu=%g)", p.rho, p.alpha1, p.alpha2, p.nu);
    return buf;
}

}  // namespace tdep
