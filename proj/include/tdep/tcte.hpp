#pragma once

// Point estimates of the transformed conditional tail expectations (TCTE)
// and of their difference, the directional tail dependence (DTD).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "tdep/copula_core.hpp"
#include "tdep/error.hpp"

namespace tdep {

/// YtoX: expected scaled rank of X given Y in its lower v-tail.
/// XtoY: the same with the roles of the rank columns exchanged.
enum class Direction { YtoX, XtoY };

inline const char* to_string(Direction d) noexcept { return d == Direction::YtoX ? "YtoX" : "XtoY"; }

class ThresholdPolicy {
public:
    enum class Kind { fixed, sqrt_log, inv_sqrt };

    static ThresholdPolicy fixed(double v) {
        require(v > 0.0 && v <= 1.0, "fixed threshold must lie in (0,1]");
        return ThresholdPolicy(Kind::fixed, v);
    }
    /// v_n = sqrt(log(n)/n), natural log.
    static ThresholdPolicy sqrt_log() { return ThresholdPolicy(Kind::sqrt_log, 0.0); }
    /// v_n = n^{-1/2}.
    static ThresholdPolicy inv_sqrt() { return ThresholdPolicy(Kind::inv_sqrt, 0.0); }

    /// Accepts "sqrtlog", "invsqrt" or a number in (0,1].
    static ThresholdPolicy parse(const std::string& text) {
        if (text == "sqrtlog" || text == "sqrt_log") return sqrt_log();
        if (text == "invsqrt" || text == "inv_sqrt") return inv_sqrt();
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        require(used == text.size() && used > 0,
                "threshold must be 'sqrtlog', 'invsqrt' or a number in (0,1]: '" + text + "'");
        return fixed(v);
    }

    Kind kind() const noexcept { return kind_; }
    double fixed_value() const noexcept { return value_; }

    std::string name() const {
        switch (kind_) {
            case Kind::sqrt_log: return "sqrtlog";
            case Kind::inv_sqrt: return "invsqrt";
            default: {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.6g", value_);
                return buf;
            }
        }
    }

    friend bool operator==(const ThresholdPolicy&, const ThresholdPolicy&) = default;

private:
    ThresholdPolicy(Kind k, double v) : kind_(k), value_(v) {}
    Kind kind_;
    double value_;
};

/// Resolved threshold for sample size n, clamped to (0,1].
inline double resolve_threshold(const ThresholdPolicy& policy, std::size_t n) {
    require(n >= 2, "resolve_threshold: n must be >= 2");
    const double nd = static_cast<double>(n);
    double v = 0.0;
    switch (policy.kind()) {
        case ThresholdPolicy::Kind::fixed: v = policy.fixed_value(); break;
        case ThresholdPolicy::Kind::sqrt_log: v = std::sqrt(std::log(nd) / nd); break;
        case ThresholdPolicy::Kind::inv_sqrt: v = 1.0 / std::sqrt(nd); break;
    }
    return std::clamp(v, 1.0 / nd / 1024.0, 1.0);
}

struct TcteEstimate {
    double value = 0.0;
    double v = 0.0;
    Direction direction = Direction::YtoX;
    Tail tail = Tail::lower;
    std::size_t n = 0;
};

namespace detail {

// sum_{i=1}^{n-1} n*C_n(i/n, v) for the YtoX orientation of (xr, yr), in
// integer arithmetic. C_n(., v) is a step function constant on [i/n,(i+1)/n),
// so this sum is the exact integral of the estimator's defining formula.
inline std::uint64_t empirical_copula_row_sum(const std::vector<std::uint32_t>& xr,
                                              const std::vector<std::uint32_t>& yr,
                                              std::size_t k) {
    const std::size_t n = xr.size();
    std::vector<std::uint32_t> hits(n + 1, 0);
    for (std::size_t j = 0; j < n; ++j)
        if (yr[j] <= k) ++hits[xr[j]];
    std::uint64_t running = 0;
    std::uint64_t total = 0;
    for (std::size_t i = 1; i < n; ++i) {
        running += hits[i];
        total += running;
    }
    return total;
}

}  // namespace detail

/// chi_n(v) = 1 - (1/(v n)) sum_{i=1}^{n-1} C_n(i/n, v) for YtoX; the XtoY
/// estimate applies the same sum with the rank columns exchanged.
/// Requires at least one observation in the conditioning set (floor(n v) >= 1).
inline TcteEstimate tcte_hat(const RankedSample& ranked, double v, Direction direction) {
    require(v > 0.0 && v <= 1.0, "tcte_hat: threshold v must lie in (0,1], got " + std::to_string(v));
    const std::size_t n = ranked.n();
    const std::size_t k = rank_floor(v, n);
    require(k >= 1, "tcte_hat: empty conditioning set (floor(n*v) = 0 for v=" + std::to_string(v) +
                        ", n=" + std::to_string(n) + ")");
    const bool yx = direction == Direction::YtoX;
    const std::uint64_t s = detail::empirical_copula_row_sum(yx ? ranked.x_ranks() : ranked.y_ranks(),
                                                             yx ? ranked.y_ranks() : ranked.x_ranks(), k);
    const double nd = static_cast<double>(n);
    TcteEstimate est;
    if (static_cast<double>(k) / nd == v) {
        // v = k/n: the estimate is the rational (kn - s)/(kn), rounded once.
        const std::uint64_t kn = static_cast<std::uint64_t>(k) * n;
        est.value = static_cast<double>(kn - s) / static_cast<double>(kn);
    } else {
        est.value = 1.0 - static_cast<double>(s) / (v * nd * nd);
    }
    est.v = v;
    est.direction = direction;
    est.tail = ranked.tail();
    est.n = n;
    return est;
}

/// chi_n(X,Y)(u,v) = chi^{Y->X}(v) - chi^{X->Y}(u).
inline double dtd_hat(const RankedSample& ranked, double u, double v) {
    return tcte_hat(ranked, v, Direction::YtoX).value - tcte_hat(ranked, u, Direction::XtoY).value;
}

inline double dtd_hat(const RankedSample& ranked, double v) { return dtd_hat(ranked, v, v); }

}  // namespace tdep
