#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace tdep::normal {

inline double cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double pdf(double x) noexcept {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Standard normal quantile; returns -inf/+inf at 0/1.
inline double quantile(double p) {
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

/// Two-sided p-value 2(1 - Phi(|z|)).
inline double two_sided_p(double z) noexcept { return std::erfc(std::abs(z) / std::numbers::sqrt2); }

namespace detail {

// Gauss-Legendre half-rules (6, 12, 20 points) from Genz's BVND.
inline constexpr std::array<double, 3> w6{0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
inline constexpr std::array<double, 3> x6{-0.9324695142031522, -0.6612093864662647, -0.2386191860831970};
inline constexpr std::array<double, 6> w12{0.4717533638651177e-01, 0.1069393259953183,
                                           0.1600783285433464,     0.2031674267230659,
                                           0.2334925365383547,     0.2491470458134029};
inline constexpr std::array<double, 6> x12{-0.9815606342467191, -0.9041172563704750,
                                           -0.7699026741943050, -0.5873179542866171,
                                           -0.3678314989981802, -0.1252334085114692};
inline constexpr std::array<double, 10> w20{
    0.1761400713915212e-01, 0.4060142980038694e-01, 0.6267204833410906e-01,
    0.8327674157670475e-01, 0.1019301198172404,     0.1181945319615184,
    0.1316886384491766,     0.1420961093183821,     0.1491729864726037,
    0.1527533871307259};
inline constexpr std::array<double, 10> x20{
    -0.9931285991850949, -0.9639719272779138, -0.9122344282513259, -0.8391169718222188,
    -0.7463319064601508, -0.6360536807265150, -0.5108670019508271, -0.3737060887154196,
    -0.2277858511416451, -0.7652652113349733e-01};

// P(X > h, Y > k) for a standard bivariate normal with correlation r (Genz 2004).
template <std::size_t N>
double bvnu_impl(double h, double k, double r, const std::array<double, N>& w,
                 const std::array<double, N>& x) {
    constexpr double twopi = 2.0 * std::numbers::pi;
    double hk = h * k;
    double bvn = 0.0;
    if (std::abs(r) < 0.925) {
        const double hs = (h * h + k * k) / 2.0;
        const double asr = std::asin(r);
        for (std::size_t i = 0; i < N; ++i) {
            double sn = std::sin(asr * (x[i] + 1.0) / 2.0);
            bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
            sn = std::sin(asr * (-x[i] + 1.0) / 2.0);
            bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
        }
        return bvn * asr / (2.0 * twopi) + cdf(-h) * cdf(-k);
    }
    if (r < 0.0) {
        k = -k;
        hk = -hk;
    }
    if (std::abs(r) < 1.0) {
        const double as = (1.0 - r) * (1.0 + r);
        double a = std::sqrt(as);
        const double bs = (h - k) * (h - k);
        const double c = (4.0 - hk) / 8.0;
        const double d = (12.0 - hk) / 16.0;
        bvn = a * std::exp(-(bs / as + hk) / 2.0) *
              (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
        if (hk > -160.0) {
            const double b = std::sqrt(bs);
            bvn -= std::exp(-hk / 2.0) * std::sqrt(twopi) * cdf(-b / a) * b *
                   (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (std::size_t i = 0; i < N; ++i) {
            for (double sgn : {1.0, -1.0}) {
                const double xs = std::pow(a * (sgn * x[i] + 1.0), 2);
                const double rs = std::sqrt(1.0 - xs);
                const double asr = -(bs / xs + hk) / 2.0;
                if (asr > -100.0) {
                    bvn += a * w[i] * std::exp(asr) *
                           (std::exp(-hk * xs / (2.0 * std::pow(1.0 + rs, 2))) / rs -
                            (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn = -bvn / twopi;
    }
    if (r > 0.0) return bvn + cdf(-std::max(h, k));
    bvn = -bvn;
    if (k > h) {
        if (h < 0.0) return bvn + cdf(k) - cdf(h);
        return bvn + cdf(-h) - cdf(-k);
    }
    return bvn;
}

}  // namespace detail

/// P(X > h, Y > k), standard bivariate normal with correlation r.
inline double bivariate_upper(double h, double k, double r) {
    const double ar = std::abs(r);
    if (ar < 0.3) return detail::bvnu_impl(h, k, r, detail::w6, detail::x6);
    if (ar < 0.75) return detail::bvnu_impl(h, k, r, detail::w12, detail::x12);
    return detail::bvnu_impl(h, k, r, detail::w20, detail::x20);
}

/// Phi_2(x, y; r) = P(X <= x, Y <= y).
inline double bivariate_cdf(double x, double y, double r) {
    if (std::isinf(x) || std::isinf(y)) {
        if (x == -std::numeric_limits<double>::infinity() ||
            y == -std::numeric_limits<double>::infinity())
            return 0.0;
        if (std::isinf(x) && std::isinf(y)) return 1.0;
        return std::isinf(x) ? cdf(y) : cdf(x);
    }
    return std::clamp(bivariate_upper(-x, -y, r), 0.0, 1.0);
}

}  // namespace tdep::normal
