#pragma once

// Asymptotic variance of the TCTE estimator, the covariance term of the DTD
// difference, and the normal tests built on them.

#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "tdep/copula_core.hpp"
#include "tdep/error.hpp"
#include "tdep/normal.hpp"
#include "tdep/tcte.hpp"

namespace tdep {

/// Anything that supplies C, d/du C and d/dv C at arbitrary points of [0,1]^2.
template <class E>
concept CopulaEvaluator = requires(const E& e, double u, double v) {
    { e.value(u, v) } -> std::convertible_to<double>;
    { e.d1(u, v) } -> std::convertible_to<double>;
    { e.d2(u, v) } -> std::convertible_to<double>;
};

/// Three free callables bundled as an evaluator.
struct FunctionEvaluator {
    std::function<double(double, double)> c;
    std::function<double(double, double)> dc1;
    std::function<double(double, double)> dc2;

    double value(double u, double v) const { return c(u, v); }
    double d1(double u, double v) const { return dc1(u, v); }
    double d2(double u, double v) const { return dc2(u, v); }
};

/// C_P(a,b) = C(b,a), with derivatives exchanged accordingly.
template <CopulaEvaluator E>
struct Permuted {
    const E& base;

    double value(double a, double b) const { return base.value(b, a); }
    double d1(double a, double b) const { return base.d2(b, a); }
    double d2(double a, double b) const { return base.d1(b, a); }
};

inline constexpr std::size_t default_quadrature_grid = 200;
inline constexpr double variance_floor = 1e-12;
inline constexpr double quadrature_tolerance = 1e-8;

namespace detail {

inline void check_finite(double x, const char* what) {
    if (!std::isfinite(x))
        throw NumericError(std::string(what) + ": quadrature produced a non-finite value");
}

// Integer rank bounds for a grid so that the empirical copula is read by
// table lookup rather than through rank_floor at every cell.
template <class E>
double grid_value(const E& e, double z, double w, std::size_t az, std::size_t bw) {
    if constexpr (std::is_same_v<E, EmpiricalCopula>)
        return static_cast<double>(e.count(az, bw)) / static_cast<double>(e.n());
    else
        return e.value(z, w);
}

template <class E>
std::vector<std::size_t> rank_bounds(const E& e, const std::vector<double>& t) {
    std::vector<std::size_t> out(t.size(), 0);
    if constexpr (std::is_same_v<E, EmpiricalCopula>)
        for (std::size_t i = 0; i < t.size(); ++i) out[i] = rank_floor(t[i], e.n());
    return out;
}

// Midpoints and common width of `cells` cells covering [lo, hi].
struct Axis {
    std::vector<double> t;
    double width = 0.0;
};

inline Axis midpoints(double lo, double hi, std::size_t cells) {
    Axis a;
    if (!(hi > lo)) return a;
    a.width = (hi - lo) / static_cast<double>(cells);
    a.t.resize(cells);
    for (std::size_t k = 0; k < cells; ++k) a.t[k] = lo + (static_cast<double>(k) + 0.5) * a.width;
    return a;
}

struct Column {
    double t, c, a, b;  // point, C(t,v), d1 C(t,v), d2 C(t,v)
};

template <CopulaEvaluator E>
Column column(const E& e, double t, double v) {
    return {t, e.value(t, v), e.d1(t, v), e.d2(t, v)};
}

// Integrand of the variance over the triangle u < w, before the 2/v^2 factor.
inline double variance_kernel(const Column& p, const Column& q, double v) {
    const double u = p.t;
    const double w = q.t;
    return p.c * (1.0 - q.c) + p.b * q.b * v * (1.0 - v) + p.a * q.a * u * (1.0 - w) -
           p.b * q.c * (1.0 - v) - q.b * p.c * (1.0 - v) - p.a * (p.c - q.c * u) -
           q.a * p.c * (1.0 - w) + p.b * q.a * (q.c - v * w) + q.b * p.a * (p.c - v * u);
}

}  // namespace detail

/// sigma^2_C(v): (2/v^2) times the double integral over 0 < u < w < 1.
/// Off-diagonal cells of the grid x grid partition use the midpoint rule;
/// each diagonal cell contributes its lower triangle at the triangle centroid.
template <CopulaEvaluator E>
double sigma2(const E& e, double v, std::size_t grid_size = default_quadrature_grid) {
    require(v > 0.0 && v <= 1.0, "sigma2: v must lie in (0,1]");
    require(grid_size >= 8, "sigma2: grid_size must be >= 8");
    const std::size_t g = grid_size;
    const double h = 1.0 / static_cast<double>(g);
    std::vector<detail::Column> mid(g);
    for (std::size_t k = 0; k < g; ++k) mid[k] = detail::column(e, (static_cast<double>(k) + 0.5) * h, v);

    double off = 0.0;
    for (std::size_t j = 1; j < g; ++j) {
        double row = 0.0;
        for (std::size_t i = 0; i < j; ++i) row += detail::variance_kernel(mid[i], mid[j], v);
        off += row;
    }
    double diag = 0.0;
    for (std::size_t k = 0; k < g; ++k) {
        const double t = mid[k].t;
        diag += detail::variance_kernel(detail::column(e, t - h / 6.0, v), detail::column(e, t + h / 6.0, v), v);
    }
    const double result = 2.0 / (v * v) * (off * h * h + diag * h * h / 2.0);
    detail::check_finite(result, "sigma2");
    return result;
}

/// sigma^2_{C_P}(u): the variance of the X->Y estimate.
template <CopulaEvaluator E>
double sigma2_permuted(const E& e, double u, std::size_t grid_size = default_quadrature_grid) {
    return sigma2(Permuted<E>{e}, u, grid_size);
}

/// Covariance term V_C(u,v) of the DTD difference, integrated over
/// (z,w) in [0,1]^2 split at z = u and w = v, grid_size midpoint cells in
/// each of the (up to) four sub-intervals.
template <CopulaEvaluator E>
double cov_V(const E& e, double u, double v, std::size_t grid_size = default_quadrature_grid) {
    require(u > 0.0 && u <= 1.0 && v > 0.0 && v <= 1.0, "cov_V: u and v must lie in (0,1]");
    require(grid_size >= 8, "cov_V: grid_size must be >= 8");

    const detail::Axis z_axes[2] = {detail::midpoints(0.0, u, grid_size), detail::midpoints(u, 1.0, grid_size)};
    const detail::Axis w_axes[2] = {detail::midpoints(0.0, v, grid_size), detail::midpoints(v, 1.0, grid_size)};
    const double c_uv = e.value(u, v);

    double total = 0.0;
    for (int zb = 0; zb < 2; ++zb) {
        const auto& za = z_axes[zb];
        if (za.t.empty()) continue;
        const bool z_low = zb == 0;
        const auto z_rank = detail::rank_bounds(e, za.t);
        std::vector<double> c_zv(za.t.size()), d1_zv(za.t.size()), d2_zv(za.t.size());
        for (std::size_t i = 0; i < za.t.size(); ++i) {
            c_zv[i] = e.value(za.t[i], v);
            d1_zv[i] = e.d1(za.t[i], v);
            d2_zv[i] = e.d2(za.t[i], v);
        }
        for (int wb = 0; wb < 2; ++wb) {
            const auto& wa = w_axes[wb];
            if (wa.t.empty()) continue;
            const bool w_low = wb == 0;
            const auto w_rank = detail::rank_bounds(e, wa.t);
            std::vector<double> c_uw(wa.t.size()), d1_uw(wa.t.size()), d2_uw(wa.t.size());
            for (std::size_t j = 0; j < wa.t.size(); ++j) {
                c_uw[j] = e.value(u, wa.t[j]);
                d1_uw[j] = e.d1(u, wa.t[j]);
                d2_uw[j] = e.d2(u, wa.t[j]);
            }
            double block = 0.0;
            for (std::size_t i = 0; i < za.t.size(); ++i) {
                const double z = za.t[i];
                const double czv = c_zv[i], p1zv = d1_zv[i], p2zv = d2_zv[i];
                for (std::size_t j = 0; j < wa.t.size(); ++j) {
                    const double w = wa.t[j];
                    const double a = detail::grid_value(e, z, w, z_rank[i], w_rank[j]);
                    const double cuw = c_uw[j], p1uw = d1_uw[j], p2uw = d2_uw[j];
                    double t;
                    if (z_low && w_low) t = a - cuw * czv + p2uw * p2zv * w * (1.0 - v);
                    else if (z_low) t = czv - cuw * czv + p2uw * p2zv * v * (1.0 - w);
                    else if (w_low) t = cuw * (1.0 - czv) + p2uw * p2zv * w * (1.0 - v);
                    else t = c_uv - cuw * czv + p2uw * p2zv * v * (1.0 - w);
                    t += p1uw * p1zv * (z_low ? z * (1.0 - u) : u * (1.0 - z));
                    t -= w_low ? p2uw * (a - czv * w) + p2zv * cuw * (1.0 - v)
                               : p2uw * czv * (1.0 - w) + p2zv * (c_uv - cuw * v);
                    t -= z_low ? p1uw * czv * (1.0 - u) + p1zv * (a - cuw * z)
                               : p1uw * (c_uv - czv * u) + p1zv * cuw * (1.0 - z);
                    t += p2uw * p1zv * (a - z * w) + p2zv * p1uw * (c_uv - u * v);
                    block += t;
                }
            }
            total += block * za.width * wa.width;
        }
    }
    const double result = -total / (u * v);
    detail::check_finite(result, "cov_V");
    return result;
}

struct VarianceReport {
    double sigma2_C = 0.0;
    double sigma2_CP = 0.0;
    double cov_V = 0.0;
    double raw_total = 0.0;  // sigma2_C + sigma2_CP + 2 cov_V before clamping
    double total = 0.0;
    std::size_t grid_size = 0;
    double u = 0.0;
    double v = 0.0;
    bool clamped = false;
};

/// Variance decomposition of the DTD difference for any evaluator.
template <CopulaEvaluator E>
VarianceReport variance_report(const E& e, double u, double v, std::size_t grid_size,
                               Warnings* warnings = nullptr) {
    VarianceReport r;
    r.sigma2_C = sigma2(e, v, grid_size);
    r.sigma2_CP = sigma2_permuted(e, u, grid_size);
    r.cov_V = cov_V(e, u, v, grid_size);
    r.raw_total = r.sigma2_C + r.sigma2_CP + 2.0 * r.cov_V;
    r.total = r.raw_total;
    r.grid_size = grid_size;
    r.u = u;
    r.v = v;
    if (r.total < variance_floor) {
        r.total = variance_floor;
        r.clamped = true;
        if (warnings)
            warnings->push_back("total asymptotic variance " + std::to_string(r.raw_total) +
                                " clamped to " + std::to_string(variance_floor));
    }
    return r;
}

struct TcteTestResult {
    TcteEstimate estimate;
    double sigma2 = 0.0;
    double std_err = 0.0;  // sqrt(sigma2 / n)
    double z = 0.0;
    double p_value = 1.0;
    bool degenerate = false;
};

/// Normal test of H0: chi(v) = 1/2 for one direction, with the empirical
/// plug-in variance. A non-positive variance yields a degenerate result
/// with NaN z and p.
inline TcteTestResult test_tcte(const RankedSample& ranked, double v, Direction direction,
                                std::size_t grid_size = default_quadrature_grid) {
    TcteTestResult r;
    r.estimate = tcte_hat(ranked, v, direction);
    const EmpiricalCopula ec(ranked);
    r.sigma2 = direction == Direction::YtoX ? sigma2(ec, v, grid_size) : sigma2_permuted(ec, v, grid_size);
    const double nd = static_cast<double>(ranked.n());
    if (!(r.sigma2 > 0.0)) {
        r.degenerate = true;
        r.std_err = 0.0;
        r.z = std::numeric_limits<double>::quiet_NaN();
        r.p_value = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    r.std_err = std::sqrt(r.sigma2 / nd);
    r.z = (r.estimate.value - 0.5) / r.std_err;
    r.p_value = normal::two_sided_p(r.z);
    return r;
}

struct DirectionalZ {
    double z = 0.0;
    double p_value = 1.0;
};

struct DtdTestResult {
    double chi_yx = 0.0;
    double chi_xy = 0.0;
    double chi_diff = 0.0;
    VarianceReport variance;
    double z = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    QuadrantStatus quadrant;
    bool degenerate = false;
    // Tests of chi = 1/2 for each direction from the same variance pieces.
    DirectionalZ yx_vs_half;
    DirectionalZ xy_vs_half;
    Warnings warnings;
};

namespace detail {

inline DirectionalZ half_test(double chi, double s2, double n) {
    if (!(s2 > 0.0)) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    const double z = std::sqrt(n) * (chi - 0.5) / std::sqrt(s2);
    return {z, normal::two_sided_p(z)};
}

}  // namespace detail

/// Normal test of H0: chi(X,Y)(u,v) = 0 with the empirical plug-in variance.
inline DtdTestResult test_dtd(const RankedSample& ranked, double u, double v,
                              std::size_t grid_size = default_quadrature_grid) {
    DtdTestResult r;
    r.n = ranked.n();
    r.chi_yx = tcte_hat(ranked, v, Direction::YtoX).value;
    r.chi_xy = tcte_hat(ranked, u, Direction::XtoY).value;
    r.chi_diff = r.chi_yx - r.chi_xy;
    const EmpiricalCopula ec(ranked);
    r.variance = variance_report(ec, u, v, grid_size, &r.warnings);
    r.degenerate = r.variance.raw_total < -quadrature_tolerance;
    if (r.degenerate) r.warnings.push_back("degenerate variance: negative beyond quadrature tolerance");
    const double nd = static_cast<double>(r.n);
    r.z = std::sqrt(nd) * r.chi_diff / std::sqrt(r.variance.total);
    r.p_value = normal::two_sided_p(r.z);
    r.quadrant = quadrant_status(ec);
    r.yx_vs_half = detail::half_test(r.chi_yx, r.variance.sigma2_C, nd);
    r.xy_vs_half = detail::half_test(r.chi_xy, r.variance.sigma2_CP, nd);
    return r;
}

inline DtdTestResult test_dtd(const RankedSample& ranked, double v,
                              std::size_t grid_size = default_quadrature_grid) {
    return test_dtd(ranked, v, v, grid_size);
}

}  // namespace tdep
