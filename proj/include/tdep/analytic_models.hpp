#pragma once

// Parametric copulas with exact partial derivatives, their theoretical TCTEs,
// bias, and the quadratic-risk curve used to pick a threshold.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "tdep/asymptotics.hpp"
#include "tdep/error.hpp"
#include "tdep/normal.hpp"
#include "tdep/tcte.hpp"

namespace tdep {

enum class Family { independence, gaussian, clayton, frank, fgm, khoudraji, comonotone, countermonotone };

class CopulaModel {
public:
    static CopulaModel independence() { return CopulaModel(Family::independence, 0.0); }
    static CopulaModel comonotone() { return CopulaModel(Family::comonotone, 0.0); }
    static CopulaModel countermonotone() { return CopulaModel(Family::countermonotone, 0.0); }

    static CopulaModel gaussian(double rho) {
        require(rho > -1.0 && rho < 1.0, "gaussian copula needs rho in (-1,1)");
        return CopulaModel(Family::gaussian, rho);
    }
    static CopulaModel clayton(double theta) {
        require(theta > 0.0 && std::isfinite(theta), "clayton copula needs theta > 0");
        return CopulaModel(Family::clayton, theta);
    }
    static CopulaModel frank(double theta) {
        require(theta != 0.0 && std::isfinite(theta), "frank copula needs theta != 0");
        return CopulaModel(Family::frank, theta);
    }
    static CopulaModel fgm(double theta) {
        require(theta >= -1.0 && theta <= 1.0, "fgm copula needs theta in [-1,1]");
        return CopulaModel(Family::fgm, theta);
    }
    /// K(u,v) = u^delta C(u^{1-delta}, v).
    static CopulaModel khoudraji(const CopulaModel& base, double delta) {
        require(delta >= 0.0 && delta <= 1.0, "khoudraji device needs delta in [0,1]");
        CopulaModel m(Family::khoudraji, delta);
        m.base_ = std::make_shared<const CopulaModel>(base);
        return m;
    }

    Family family() const noexcept { return family_; }
    /// rho, theta or delta depending on the family; 0 where there is none.
    double parameter() const noexcept { return param_; }
    const CopulaModel& base() const {
        require(base_ != nullptr, "copula model has no base");
        return *base_;
    }

    std::string name() const {
        char buf[64];
        switch (family_) {
            case Family::independence: return "independence";
            case Family::comonotone: return "comonotone";
            case Family::countermonotone: return "countermonotone";
            case Family::gaussian: std::snprintf(buf, sizeof buf, "gaussian(rho=%g)", param_); return buf;
            case Family::clayton: std::snprintf(buf, sizeof buf, "clayton(theta=%g)", param_); return buf;
            case Family::frank: std::snprintf(buf, sizeof buf, "frank(theta=%g)", param_); return buf;
            case Family::fgm: std::snprintf(buf, sizeof buf, "fgm(theta=%g)", param_); return buf;
            case Family::khoudraji:
                std::snprintf(buf, sizeof buf, ",delta=%g)", param_);
                return "khoudraji(" + base_->name() + buf;
        }
        return "unknown";
    }

    /// Locations in (0,1) where C(., v) (which = first) or C(v, .) (which =
    /// second) has a kink, for quadrature splitting.
    std::vector<double> kinks(double v, Argument which = Argument::first) const {
        switch (family_) {
            case Family::comonotone: return {v};
            case Family::countermonotone: return {1.0 - v};
            case Family::khoudraji: {
                std::vector<double> out;
                if (param_ >= 1.0) return out;
                if (which == Argument::first) {
                    for (double k : base_->kinks(v, which)) out.push_back(std::pow(k, 1.0 / (1.0 - param_)));
                } else {
                    out = base_->kinks(std::pow(v, 1.0 - param_), which);
                }
                return out;
            }
            default: return {};
        }
    }

    double eval(double u, double v) const {
        require(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0, "copula arguments must lie in [0,1]");
        return value(u, v);
    }

    double value(double u, double v) const {
        if (u <= 0.0 || v <= 0.0) return 0.0;
        if (u >= 1.0) return std::min(v, 1.0);
        if (v >= 1.0) return u;
        const double t = param_;
        switch (family_) {
            case Family::independence: return u * v;
            case Family::comonotone: return std::min(u, v);
            case Family::countermonotone: return std::max(u + v - 1.0, 0.0);
            case Family::fgm: return u * v * (1.0 + t * (1.0 - u) * (1.0 - v));
            case Family::clayton: return std::pow(std::pow(u, -t) + std::pow(v, -t) - 1.0, -1.0 / t);
            case Family::frank: {
                const double a = std::expm1(-t * u), b = std::expm1(-t * v), d = std::expm1(-t);
                return -std::log1p(a * b / d) / t;
            }
            case Family::gaussian:
                return std::clamp(normal::bivariate_cdf(normal::quantile(u), normal::quantile(v), t), 0.0,
                                  std::min(u, v));
            case Family::khoudraji:
                return std::pow(u, t) * base_->value(std::pow(u, 1.0 - t), v);
        }
        return 0.0;
    }

    /// Partial derivative in the first argument.
    double d1(double u, double v) const {
        u = std::clamp(u, 0.0, 1.0);
        v = std::clamp(v, 0.0, 1.0);
        const double t = param_;
        switch (family_) {
            case Family::independence: return v;
            case Family::comonotone: return u < v ? 1.0 : (u > v ? 0.0 : 0.5);
            case Family::countermonotone: {
                const double s = u + v;
                return s > 1.0 ? 1.0 : (s < 1.0 ? 0.0 : 0.5);
            }
            case Family::fgm: return v * (1.0 + t * (1.0 - 2.0 * u) * (1.0 - v));
            case Family::clayton: {
                if (v <= 0.0) return u <= 0.0 ? 1.0 : 0.0;
                if (v >= 1.0) return 1.0;
                // (1 + u^t (v^-t - 1))^{-(1+t)/t}
                const double inner = std::pow(u, t) * (std::pow(v, -t) - 1.0);
                return std::pow(1.0 + inner, -(1.0 + t) / t);
            }
            case Family::frank: {
                const double a = std::expm1(-t * u), b = std::expm1(-t * v), d = std::expm1(-t);
                return std::exp(-t * u) * b / (d + a * b);
            }
            case Family::gaussian: return gaussian_d1(u, v);
            case Family::khoudraji: {
                if (t >= 1.0) return v;
                const double s = std::pow(u, 1.0 - t);
                const double ratio = s > 0.0 ? base_->value(s, v) / s : base_->d1(0.0, v);
                return t * ratio + (1.0 - t) * base_->d1(s, v);
            }
        }
        return 0.0;
    }

    /// Partial derivative in the second argument.
    double d2(double u, double v) const {
        u = std::clamp(u, 0.0, 1.0);
        v = std::clamp(v, 0.0, 1.0);
        const double t = param_;
        switch (family_) {
            case Family::independence: return u;
            case Family::comonotone: return v < u ? 1.0 : (v > u ? 0.0 : 0.5);
            case Family::countermonotone: return d1(u, v);
            case Family::fgm: return u * (1.0 + t * (1.0 - u) * (1.0 - 2.0 * v));
            case Family::clayton:
            case Family::frank:
            case Family::gaussian: return d1(v, u);
            case Family::khoudraji: return std::pow(u, t) * base_->d2(std::pow(u, 1.0 - t), v);
        }
        return 0.0;
    }

    bool exchangeable() const noexcept {
        return family_ != Family::khoudraji || param_ == 0.0 || param_ == 1.0;
    }

private:
    CopulaModel(Family f, double p) : family_(f), param_(p) {}

    double gaussian_d1(double u, double v) const {
        const double rho = param_;
        if (v <= 0.0) return 0.0;
        if (v >= 1.0) return 1.0;
        if (rho == 0.0) return v;
        if (u <= 0.0) return rho > 0.0 ? 1.0 : 0.0;
        if (u >= 1.0) return rho > 0.0 ? 0.0 : 1.0;
        return normal::cdf((normal::quantile(v) - rho * normal::quantile(u)) / std::sqrt(1.0 - rho * rho));
    }

    Family family_;
    double param_;
    std::shared_ptr<const CopulaModel> base_;
};

namespace detail {

// Adaptive Gauss-Kronrod over [0,1] split at the given interior points.
template <class F>
double integrate_unit(F f, std::vector<double> splits, double tol = 1e-10) {
    splits.erase(std::remove_if(splits.begin(), splits.end(), [](double s) { return !(s > 0.0 && s < 1.0); }),
                 splits.end());
    splits.push_back(0.0);
    splits.push_back(1.0);
    std::sort(splits.begin(), splits.end());
    splits.erase(std::unique(splits.begin(), splits.end()), splits.end());
    double total = 0.0;
    double err_total = 0.0;
    for (std::size_t k = 0; k + 1 < splits.size(); ++k) {
        double err = 0.0;
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, splits[k], splits[k + 1], 15,
                                                                                tol, &err);
        err_total += err;
    }
    if (!std::isfinite(total) || err_total > 1e-8)
        throw NumericError("quadrature did not reach 1e-8 (error estimate " + std::to_string(err_total) + ")");
    return total;
}

}  // namespace detail

/// chi(v) = 1 - (1/v) int_0^1 C(u,v) du for YtoX, with C(v,u) for XtoY.
inline double theoretical_tcte(const CopulaModel& model, double v, Direction direction) {
    require(v > 0.0 && v <= 1.0, "theoretical_tcte: v must lie in (0,1]");
    const double integral =
        direction == Direction::YtoX
            ? detail::integrate_unit([&](double u) { return model.value(u, v); }, model.kinks(v, Argument::first))
            : detail::integrate_unit([&](double u) { return model.value(v, u); }, model.kinks(v, Argument::second));
    return 1.0 - integral / v;
}

/// Limit of chi(v) as v -> 0: 1 - int_0^1 d2 C(u,0) du (YtoX) or
/// 1 - int_0^1 d1 C(0,u) du (XtoY).
inline double theoretical_tcte_limit(const CopulaModel& model, Direction direction) {
    const double integral =
        direction == Direction::YtoX
            ? detail::integrate_unit([&](double u) { return model.d2(u, 0.0); }, {})
            : detail::integrate_unit([&](double u) { return model.d1(0.0, u); }, {});
    return 1.0 - integral;
}

struct LimitExtrapolation {
    double value = 0.0;
    bool converged = false;
    std::vector<double> thresholds;
    std::vector<double> chi;
};

/// Limit of chi(v) from its values at v = 1e-2, 1e-3, 1e-4, linear in v
/// through the last two points. Flags a sequence whose successive
/// differences fail to shrink.
inline LimitExtrapolation extrapolate_tcte_limit(const CopulaModel& model, Direction direction) {
    LimitExtrapolation out;
    out.thresholds = {1e-2, 1e-3, 1e-4};
    for (double v : out.thresholds) out.chi.push_back(theoretical_tcte(model, v, direction));
    const double d_far = std::abs(out.chi[1] - out.chi[0]);
    const double d_near = std::abs(out.chi[2] - out.chi[1]);
    out.value = (out.chi[2] * out.thresholds[1] - out.chi[1] * out.thresholds[2]) /
                (out.thresholds[1] - out.thresholds[2]);
    out.converged = d_near <= d_far + 1e-9;
    return out;
}

/// int_0^1 (d2 C(u,0) - C(u,v)/v) du = chi(v) - chi(0+), before squaring.
inline double bias(const CopulaModel& model, double v, Direction direction = Direction::YtoX) {
    return theoretical_tcte(model, v, direction) - theoretical_tcte_limit(model, direction);
}

/// Second-order Taylor bound on the squared bias,
/// v^2/4 int_0^1 sup_{xi in (0,v]} (d22 C(u,xi))^2 du. Diagnostic only: the
/// risk curve uses the exact bias. d22 is a central difference of d2, the
/// sup is taken over xi_grid midpoints.
inline double taylor_bias_bound(const CopulaModel& model, double v, std::size_t u_grid = 200,
                                std::size_t xi_grid = 40) {
    require(v > 0.0 && v <= 1.0, "taylor_bias_bound: v must lie in (0,1]");
    require(u_grid > 0 && xi_grid > 0, "taylor_bias_bound: empty grid");
    double total = 0.0;
    for (std::size_t i = 0; i < u_grid; ++i) {
        const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(u_grid);
        double sup = 0.0;
        for (std::size_t j = 0; j < xi_grid; ++j) {
            const double xi = v * (static_cast<double>(j) + 0.5) / static_cast<double>(xi_grid);
            const double h = std::min(1e-5, 0.5 * xi);
            const double d22 = (model.d2(u, xi + h) - model.d2(u, xi - h)) / (2.0 * h);
            sup = std::max(sup, d22 * d22);
        }
        total += sup;
    }
    return v * v * total / static_cast<double>(u_grid) / 4.0;
}

struct RiskPoint {
    double v = 0.0;
    double variance = 0.0;  // sigma^2_C(v) / n
    double bias2 = 0.0;
    double risk = 0.0;
};

struct RiskCurve {
    std::size_t n = 0;
    std::vector<RiskPoint> points;
    std::size_t argmin = 0;

    const RiskPoint& best() const { return points.at(argmin); }
};

inline constexpr std::size_t default_risk_grid = 400;

/// Asymptotic quadratic risk sigma^2_C(v)/n + bias(v)^2 on v_grid.
inline RiskCurve risk_curve(const CopulaModel& model, std::size_t n, std::span<const double> v_grid,
                            std::size_t grid_size = default_risk_grid) {
    require(n >= 2, "risk_curve: n must be >= 2");
    require(!v_grid.empty(), "risk_curve: empty threshold grid");
    RiskCurve curve;
    curve.n = n;
    const double limit = theoretical_tcte_limit(model, Direction::YtoX);
    for (double v : v_grid) {
        require(v > 0.0 && v <= 1.0, "risk_curve: thresholds must lie in (0,1]");
        RiskPoint p;
        p.v = v;
        p.variance = sigma2(model, v, grid_size) / static_cast<double>(n);
        const double b = theoretical_tcte(model, v, Direction::YtoX) - limit;
        p.bias2 = b * b;
        p.risk = p.variance + p.bias2;
        curve.points.push_back(p);
    }
    for (std::size_t k = 1; k < curve.points.size(); ++k)
        if (curve.points[k].risk < curve.points[curve.argmin].risk) curve.argmin = k;
    return curve;
}

/// Uniform grid step, 2*step, ..., up to and including `upper` (within rounding).
inline std::vector<double> uniform_grid(double step, double upper) {
    require(step > 0.0 && upper >= step && upper <= 1.0, "uniform_grid: need 0 < step <= upper <= 1");
    std::vector<double> g;
    const auto count = static_cast<std::size_t>(std::floor(upper / step + 1e-9));
    for (std::size_t k = 1; k <= count; ++k) g.push_back(static_cast<double>(k) * step);
    return g;
}

inline void write_risk_csv(std::ostream& os, const RiskCurve& curve) {
    os << "v,variance,bias2,risk\n";
    char buf[128];
    for (const auto& p : curve.points) {
        std::snprintf(buf, sizeof buf, "%.6g,%.10g,%.10g,%.10g\n", p.v, p.variance, p.bias2, p.risk);
        os << buf;
    }
}

}  // namespace tdep
