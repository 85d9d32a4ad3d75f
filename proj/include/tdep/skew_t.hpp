#pragma once

// Bivariate skew-t distribution: sampling through the conditioning
// representation and the marginal distribution function needed to map
// draws onto the copula scale.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "tdep/error.hpp"
#include "tdep/rng.hpp"

namespace tdep {

struct SkewTParams {
    double rho = 0.0;
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double nu = 3.0;

    friend bool operator==(const SkewTParams&, const SkewTParams&) = default;
};

inline void validate(const SkewTParams& p) {
    require(p.rho > -1.0 && p.rho < 1.0, "skew-t needs rho in (-1,1)");
    require(p.nu > 0.0 && std::isfinite(p.nu), "skew-t needs nu > 0");
    require(std::isfinite(p.alpha1) && std::isfinite(p.alpha2), "skew-t slants must be finite");
}

/// delta = Omega alpha / sqrt(1 + alpha' Omega alpha) for the unit-diagonal
/// scale matrix with correlation rho.
inline std::array<double, 2> skew_t_delta(const SkewTParams& p) {
    const double q = p.alpha1 * p.alpha1 + 2.0 * p.rho * p.alpha1 * p.alpha2 + p.alpha2 * p.alpha2;
    const double s = std::sqrt(1.0 + q);
    return {(p.alpha1 + p.rho * p.alpha2) / s, (p.rho * p.alpha1 + p.alpha2) / s};
}

/// Slant of the i-th univariate marginal: delta_i / sqrt(1 - delta_i^2).
inline double marginal_slant(const SkewTParams& p, int component) {
    const double d = skew_t_delta(p)[component == 0 ? 0 : 1];
    return d / std::sqrt(1.0 - d * d);
}

/// Distribution function of the univariate skew-t with slant `alpha` and
/// `nu` degrees of freedom, density 2 t_nu(y) T_{nu+1}(alpha y sqrt((nu+1)/(nu+y^2))).
/// Tabulated once on t_nu quantile nodes and interpolated in T_nu(y).
class SkewTMarginal {
public:
    static constexpr std::size_t default_nodes = 4096;

    SkewTMarginal(double alpha, double nu, std::size_t nodes = default_nodes)
        : alpha_(alpha), nu_(nu), t_(nu), t1_(nu + 1.0) {
        require(nu > 0.0 && std::isfinite(nu), "skew-t marginal needs nu > 0");
        require(nodes >= 16, "skew-t marginal needs at least 16 nodes");
        namespace bq = boost::math::quadrature;
        const auto f = [this](double y) { return density(y); };
        const double step = 1.0 / static_cast<double>(nodes + 1);
        nodes_.resize(nodes);
        cdf_.resize(nodes);
        for (std::size_t k = 0; k < nodes; ++k)
            nodes_[k] = boost::math::quantile(t_, static_cast<double>(k + 1) * step);
        double acc = bq::gauss_kronrod<double, 31>::integrate(f, -std::numeric_limits<double>::infinity(),
                                                              nodes_[0], 15, 1e-12);
        cdf_[0] = acc;
        for (std::size_t k = 1; k < nodes; ++k) {
            acc += bq::gauss_kronrod<double, 15>::integrate(f, nodes_[k - 1], nodes_[k], 0, 0.0);
            cdf_[k] = acc;
        }
        const double upper = bq::gauss_kronrod<double, 31>::integrate(
            f, nodes_.back(), std::numeric_limits<double>::infinity(), 15, 1e-12);
        const double total = acc + upper;
        if (!std::isfinite(total) || std::abs(total - 1.0) > 1e-6)
            throw NumericError("skew-t marginal CDF integration did not converge (total mass " +
                               std::to_string(total) + ")");
        for (auto& c : cdf_) c = std::clamp(c / total, 0.0, 1.0);
        for (std::size_t k = 1; k < nodes; ++k) cdf_[k] = std::max(cdf_[k], cdf_[k - 1]);
        step_ = step;
    }

    double alpha() const noexcept { return alpha_; }
    double nu() const noexcept { return nu_; }

    double density(double y) const {
        const double arg = alpha_ * y * std::sqrt((nu_ + 1.0) / (nu_ + y * y));
        return 2.0 * boost::math::pdf(t_, y) * boost::math::cdf(t1_, arg);
    }

    double cdf(double y) const {
        if (std::isnan(y)) return y;
        if (y == -std::numeric_limits<double>::infinity()) return 0.0;
        if (y == std::numeric_limits<double>::infinity()) return 1.0;
        const std::size_t m = nodes_.size();
        if (y <= nodes_.front()) {
            const double ratio = boost::math::cdf(t_, y) / boost::math::cdf(t_, nodes_.front());
            return cdf_.front() * ratio;
        }
        if (y >= nodes_.back()) {
            const double ratio = boost::math::cdf(boost::math::complement(t_, y)) /
                                 boost::math::cdf(boost::math::complement(t_, nodes_.back()));
            return 1.0 - (1.0 - cdf_.back()) * ratio;
        }
        const double p = boost::math::cdf(t_, y);
        const double pos = p / step_ - 1.0;  // node k sits at p = (k+1) step
        auto k = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(m - 2)));
        if (y < nodes_[k]) k = k > 0 ? k - 1 : 0;
        while (k + 2 < m && y > nodes_[k + 1]) ++k;
        const double p0 = static_cast<double>(k + 1) * step_;
        const double frac = std::clamp((p - p0) / step_, 0.0, 1.0);
        return cdf_[k] + frac * (cdf_[k + 1] - cdf_[k]);
    }

private:
    double alpha_;
    double nu_;
    boost::math::students_t_distribution<double> t_;
    boost::math::students_t_distribution<double> t1_;
    std::vector<double> nodes_;
    std::vector<double> cdf_;
    double step_ = 0.0;
};

/// Process-wide cache of tabulated marginals keyed by (slant, nu).
inline std::shared_ptr<const SkewTMarginal> cached_marginal(double alpha, double nu) {
    static std::mutex mu;
    static std::map<std::pair<double, double>, std::shared_ptr<const SkewTMarginal>> cache;
    const std::lock_guard lock(mu);
    auto& slot = cache[{alpha, nu}];
    if (!slot) slot = std::make_shared<const SkewTMarginal>(alpha, nu);
    return slot;
}

/// Draws from the bivariate skew-t and maps each coordinate through its
/// marginal distribution function.
class SkewTCopula {
public:
    explicit SkewTCopula(const SkewTParams& p) : params_(p) {
        validate(p);
        const auto d = skew_t_delta(p);
        // Cholesky factor of [[1, d1, d2], [d1, 1, rho], [d2, rho, 1]].
        l10_ = d[0];
        l11_ = std::sqrt(1.0 - d[0] * d[0]);
        l20_ = d[1];
        l21_ = (p.rho - d[0] * d[1]) / l11_;
        const double rest = 1.0 - d[1] * d[1] - l21_ * l21_;
        require(rest > 0.0, "skew-t parameters give a singular covariance");
        l22_ = std::sqrt(rest);
        m1_ = cached_marginal(marginal_slant(p, 0), p.nu);
        m2_ = cached_marginal(marginal_slant(p, 1), p.nu);
    }

    const SkewTParams& params() const noexcept { return params_; }
    const SkewTMarginal& marginal(int component) const { return component == 0 ? *m1_ : *m2_; }

    /// One skew-t observation on the original scale.
    std::array<double, 2> draw(Rng& rng) const {
        const double e0 = rng.normal(), e1 = rng.normal(), e2 = rng.normal();
        double y1 = l10_ * e0 + l11_ * e1;
        double y2 = l20_ * e0 + l21_ * e1 + l22_ * e2;
        if (e0 <= 0.0) {
            y1 = -y1;
            y2 = -y2;
        }
        const double scale = std::sqrt(rng.chi_square(params_.nu) / params_.nu);
        return {y1 / scale, y2 / scale};
    }

    /// One observation on the copula scale.
    std::array<double, 2> draw_uniform(Rng& rng) const {
        const auto y = draw(rng);
        return {clamp_open(m1_->cdf(y[0])), clamp_open(m2_->cdf(y[1]))};
    }

private:
    static double clamp_open(double p) {
        constexpr double eps = 1e-15;
        return std::clamp(p, eps, 1.0 - eps);
    }

    SkewTParams params_;
    double l10_ = 0, l11_ = 0, l20_ = 0, l21_ = 0, l22_ = 0;
    std::shared_ptr<const SkewTMarginal> m1_;
    std::shared_ptr<const SkewTMarginal> m2_;
};

}  // namespace tdep
