#pragma once

// Rank transforms, the empirical copula, its finite-difference partial
// derivatives, and quadrant-dependence diagnostics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tdep/error.hpp"

namespace tdep {

/// Which tail of the original variables a ranked sample exposes to the
/// (lower-tail) estimators. `upper` means ranks have been reflected.
enum class Tail { lower, upper };

inline const char* to_string(Tail t) noexcept { return t == Tail::lower ? "lower" : "upper"; }

/// Tie counts recorded by rank_transform (observations that shared a value
/// with an earlier one) plus any diagnostics raised while ranking.
struct RankDiagnostics {
    std::size_t x_ties = 0;
    std::size_t y_ties = 0;
    Warnings warnings;
};

/// Paired ranks of a bivariate sample. Ranks are stored as integers in 1..n;
/// the scaled rank of observation i is rank/n.
class RankedSample {
public:
    RankedSample(std::vector<std::uint32_t> x_rank, std::vector<std::uint32_t> y_rank,
                 std::array<std::string, 2> labels = {"X", "Y"}, Tail tail = Tail::lower,
                 RankDiagnostics diagnostics = {})
        : x_rank_(std::move(x_rank)), y_rank_(std::move(y_rank)), labels_(std::move(labels)),
          tail_(tail), diag_(std::move(diagnostics)) {
        require(x_rank_.size() == y_rank_.size(), "rank vectors differ in length");
        require(x_rank_.size() >= 2, "ranked sample needs n >= 2");
        require(is_permutation(x_rank_) && is_permutation(y_rank_),
                "ranks must be a permutation of 1..n");
    }

    std::size_t n() const noexcept { return x_rank_.size(); }
    std::uint32_t x_rank(std::size_t i) const { return x_rank_[i]; }
    std::uint32_t y_rank(std::size_t i) const { return y_rank_[i]; }
    const std::vector<std::uint32_t>& x_ranks() const noexcept { return x_rank_; }
    const std::vector<std::uint32_t>& y_ranks() const noexcept { return y_rank_; }

    double rx(std::size_t i) const { return static_cast<double>(x_rank_[i]) / static_cast<double>(n()); }
    double ry(std::size_t i) const { return static_cast<double>(y_rank_[i]) / static_cast<double>(n()); }

    std::vector<double> rx() const { return scaled(x_rank_); }
    std::vector<double> ry() const { return scaled(y_rank_); }

    const std::array<std::string, 2>& labels() const noexcept { return labels_; }
    Tail tail() const noexcept { return tail_; }

    std::size_t x_ties() const noexcept { return diag_.x_ties; }
    std::size_t y_ties() const noexcept { return diag_.y_ties; }
    const Warnings& warnings() const noexcept { return diag_.warnings; }
    const RankDiagnostics& diagnostics() const noexcept { return diag_; }

    /// The sample of (Y, X): roles of the two rank columns exchanged.
    RankedSample swapped() const {
        return RankedSample(y_rank_, x_rank_, {labels_[1], labels_[0]}, tail_,
                            {diag_.y_ties, diag_.x_ties, diag_.warnings});
    }

    friend bool operator==(const RankedSample& a, const RankedSample& b) {
        return a.x_rank_ == b.x_rank_ && a.y_rank_ == b.y_rank_;
    }

private:
    static bool is_permutation(const std::vector<std::uint32_t>& r) {
        std::vector<char> seen(r.size() + 1, 0);
        for (auto k : r) {
            if (k < 1 || k > r.size() || seen[k]) return false;
            seen[k] = 1;
        }
        return true;
    }

    std::vector<double> scaled(const std::vector<std::uint32_t>& r) const {
        std::vector<double> out(r.size());
        const double n = static_cast<double>(r.size());
        std::transform(r.begin(), r.end(), out.begin(),
                       [n](std::uint32_t k) { return static_cast<double>(k) / n; });
        return out;
    }

    std::vector<std::uint32_t> x_rank_;
    std::vector<std::uint32_t> y_rank_;
    std::array<std::string, 2> labels_;
    Tail tail_ = Tail::lower;
    RankDiagnostics diag_;
};

namespace detail {

// Ranks 1..n; equal values ranked by order of first occurrence.
inline std::vector<std::uint32_t> ranks_first_occurrence(std::span<const double> x,
                                                         std::size_t& ties) {
    std::vector<std::uint32_t> order(x.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x[a] < x[b]; });
    std::vector<std::uint32_t> rank(x.size());
    ties = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        rank[order[k]] = static_cast<std::uint32_t>(k + 1);
        if (k > 0 && x[order[k]] == x[order[k - 1]]) ++ties;
    }
    return rank;
}

}  // namespace detail

/// Scaled ranks (rank(x_i)/n, rank(y_i)/n). Ties are broken by first
/// occurrence; the tie counts are reported on the result.
inline RankedSample rank_transform(std::span<const double> x, std::span<const double> y,
                                   std::array<std::string, 2> labels = {"X", "Y"}) {
    require(x.size() == y.size(), "rank_transform: x and y lengths differ (" +
                                      std::to_string(x.size()) + " vs " +
                                      std::to_string(y.size()) + ")");
    require(x.size() >= 2, "rank_transform: need at least 2 observations");
    for (std::size_t i = 0; i < x.size(); ++i)
        require(std::isfinite(x[i]) && std::isfinite(y[i]),
                "rank_transform: non-finite value at row " + std::to_string(i));
    RankDiagnostics diag;
    auto rx = detail::ranks_first_occurrence(x, diag.x_ties);
    auto ry = detail::ranks_first_occurrence(y, diag.y_ties);
    if (diag.x_ties + diag.y_ties > 0) {
        diag.warnings.push_back("ties broken by first occurrence: " +
                                std::to_string(diag.x_ties) + " in " + labels[0] + ", " +
                                std::to_string(diag.y_ties) + " in " + labels[1]);
    }
    return RankedSample(std::move(rx), std::move(ry), std::move(labels), Tail::lower,
                        std::move(diag));
}

/// Ranked sample of (-X, -Y): every rank r becomes n + 1 - r. Applying it
/// twice returns the original sample.
inline RankedSample upper_tail_view(const RankedSample& s) {
    const auto n1 = static_cast<std::uint32_t>(s.n() + 1);
    std::vector<std::uint32_t> x(s.n());
    std::vector<std::uint32_t> y(s.n());
    for (std::size_t i = 0; i < s.n(); ++i) {
        x[i] = n1 - s.x_rank(i);
        y[i] = n1 - s.y_rank(i);
    }
    return RankedSample(std::move(x), std::move(y), s.labels(),
                        s.tail() == Tail::lower ? Tail::upper : Tail::lower, s.diagnostics());
}

/// Number of scaled ranks k/n (k = 1..n) with k/n <= t, using the same
/// double arithmetic as RankedSample::rx.
inline std::size_t rank_floor(double t, std::size_t n) noexcept {
    if (!(t > 0.0)) return 0;
    if (t >= 1.0) return n;
    const double nd = static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::floor(t * nd));
    if (k > n) k = n;
    while (k < n && static_cast<double>(k + 1) / nd <= t) ++k;
    while (k > 0 && static_cast<double>(k) / nd > t) --k;
    return k;
}

enum class Argument { first, second };

namespace detail {

// Counts #{i : xr_i <= a, yr_i <= b} for integer rank bounds a, b.
class CountIndex {
public:
    static constexpr std::size_t dense_limit = 4096;

    explicit CountIndex(const RankedSample& s) : n_(s.n()) {
        std::vector<std::uint32_t> y_by_x(n_ + 1, 0);
        for (std::size_t i = 0; i < n_; ++i) y_by_x[s.x_rank(i)] = s.y_rank(i);
        if (n_ <= dense_limit) {
            dense_.assign((n_ + 1) * (n_ + 1), 0);
            for (std::size_t a = 1; a <= n_; ++a) {
                const std::uint16_t* prev = &dense_[(a - 1) * (n_ + 1)];
                std::uint16_t* row = &dense_[a * (n_ + 1)];
                const std::uint32_t yr = y_by_x[a];
                for (std::size_t b = 0; b <= n_; ++b)
                    row[b] = static_cast<std::uint16_t>(prev[b] + (b >= yr ? 1 : 0));
            }
        } else {
            build_tree(y_by_x);
        }
    }

    std::size_t count(std::size_t a, std::size_t b) const {
        if (a == 0 || b == 0) return 0;
        if (!dense_.empty()) return dense_[a * (n_ + 1) + b];
        return tree_count(a, b);
    }

private:
    // Merge-sort tree over x order: level L holds y ranks sorted in blocks of 2^L.
    void build_tree(const std::vector<std::uint32_t>& y_by_x) {
        std::vector<std::uint32_t> base(y_by_x.begin() + 1, y_by_x.end());
        levels_.push_back(base);
        for (std::size_t width = 1; width < n_; width *= 2) {
            const auto& prev = levels_.back();
            std::vector<std::uint32_t> next(n_);
            for (std::size_t lo = 0; lo < n_; lo += 2 * width) {
                const std::size_t mid = std::min(lo + width, n_);
                const std::size_t hi = std::min(lo + 2 * width, n_);
                std::merge(prev.begin() + lo, prev.begin() + mid, prev.begin() + mid,
                           prev.begin() + hi, next.begin() + lo);
            }
            levels_.push_back(std::move(next));
        }
    }

    std::size_t tree_count(std::size_t a, std::size_t b) const {
        // Decompose the prefix [0, a) into aligned blocks, largest first.
        std::size_t total = 0;
        std::size_t pos = 0;
        for (std::size_t lvl = levels_.size(); lvl-- > 0;) {
            const std::size_t width = std::size_t{1} << lvl;
            if (pos + width <= a) {
                const auto& L = levels_[lvl];
                total += static_cast<std::size_t>(
                    std::upper_bound(L.begin() + pos, L.begin() + pos + width,
                                     static_cast<std::uint32_t>(b)) -
                    (L.begin() + pos));
                pos += width;
            }
        }
        return total;
    }

    std::size_t n_;
    std::vector<std::uint16_t> dense_;
    std::vector<std::vector<std::uint32_t>> levels_;
};

}  // namespace detail

/// Deheuvels' empirical copula C_n(u,v) = (1/n) #{i : rx_i <= u, ry_i <= v},
/// with finite-difference partial derivatives at bandwidth h (default n^{-1/2}).
class EmpiricalCopula {
public:
    explicit EmpiricalCopula(RankedSample ranked, std::optional<double> bandwidth = std::nullopt)
        : ranked_(std::make_shared<const RankedSample>(std::move(ranked))),
          index_(std::make_shared<const detail::CountIndex>(*ranked_)) {
        h_ = bandwidth.value_or(1.0 / std::sqrt(static_cast<double>(ranked_->n())));
        require(h_ > 0.0 && std::isfinite(h_), "empirical copula bandwidth must be positive");
    }

    const RankedSample& ranked() const noexcept { return *ranked_; }
    std::size_t n() const noexcept { return ranked_->n(); }
    double bandwidth() const noexcept { return h_; }

    double eval(double u, double v) const {
        require(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0,
                "empirical copula arguments must lie in [0,1]");
        return value(u, v);
    }

    /// eval() without domain checks; arguments outside [0,1] are clamped.
    double value(double u, double v) const noexcept {
        const std::size_t a = rank_floor(u, n());
        const std::size_t b = rank_floor(v, n());
        return static_cast<double>(index_->count(a, b)) / static_cast<double>(n());
    }

    /// Integer count #{i : x rank <= a, y rank <= b}.
    std::size_t count(std::size_t a, std::size_t b) const { return index_->count(a, b); }

    double partial_derivative(Argument which, double u, double v) const {
        require(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0,
                "partial derivative arguments must lie in [0,1]");
        return which == Argument::first ? d1(u, v) : d2(u, v);
    }

    // Three-branch scheme: one-sided near 0 and 1, centered in between.
    double d1(double u, double v) const noexcept {
        const double h = h_;
        if (u < h) return value(2.0 * h, v) / (2.0 * h);
        if (u <= 1.0 - h) return (value(u + h, v) - value(u - h, v)) / (2.0 * h);
        return (value(1.0, v) - value(1.0 - 2.0 * h, v)) / (2.0 * h);
    }

    double d2(double u, double v) const noexcept {
        const double h = h_;
        if (v < h) return value(u, 2.0 * h) / (2.0 * h);
        if (v <= 1.0 - h) return (value(u, v + h) - value(u, v - h)) / (2.0 * h);
        return (value(u, 1.0) - value(u, 1.0 - 2.0 * h)) / (2.0 * h);
    }

private:
    std::shared_ptr<const RankedSample> ranked_;
    std::shared_ptr<const detail::CountIndex> index_;
    double h_ = 0.0;
};

enum class QuadrantVerdict { pqd, nqd, indeterminate };

inline const char* to_string(QuadrantVerdict q) noexcept {
    switch (q) {
        case QuadrantVerdict::pqd: return "PQD";
        case QuadrantVerdict::nqd: return "NQD";
        default: return "indeterminate";
    }
}

struct QuadrantStatus {
    QuadrantVerdict verdict = QuadrantVerdict::indeterminate;
    double max_positive_gap = 0.0;  // max of C_n(u,v) - uv over the grid
    double max_negative_gap = 0.0;  // min of C_n(u,v) - uv over the grid
    double tolerance = 0.0;
};

inline constexpr std::size_t default_quadrant_grid = 50;

/// Sign pattern of C_n(u,v) - uv on a grid_size x grid_size uniform grid over
/// [0,1]^2. PQD needs the gap to stay above -tolerance and exceed +tolerance
/// somewhere; NQD mirrors that. A gap inside the band everywhere (consistent
/// with both) or crossing it on both sides is indeterminate.
inline QuadrantStatus quadrant_status(const EmpiricalCopula& ec,
                                      std::size_t grid_size = default_quadrant_grid,
                                      std::optional<double> tolerance = std::nullopt) {
    require(grid_size >= 2, "quadrant_status: grid_size must be >= 2");
    QuadrantStatus st;
    st.tolerance = tolerance.value_or(2.0 / std::sqrt(static_cast<double>(ec.n())));
    double hi = -1.0;
    double lo = 1.0;
    const double step = 1.0 / static_cast<double>(grid_size - 1);
    for (std::size_t i = 0; i < grid_size; ++i) {
        const double u = static_cast<double>(i) * step;
        for (std::size_t j = 0; j < grid_size; ++j) {
            const double v = static_cast<double>(j) * step;
            const double gap = ec.value(u, v) - u * v;
            hi = std::max(hi, gap);
            lo = std::min(lo, gap);
        }
    }
    st.max_positive_gap = hi;
    st.max_negative_gap = lo;
    const bool above = lo >= -st.tolerance;
    const bool below = hi <= st.tolerance;
    if (above && !below) st.verdict = QuadrantVerdict::pqd;
    else if (below && !above) st.verdict = QuadrantVerdict::nqd;
    else st.verdict = QuadrantVerdict::indeterminate;
    return st;
}

}  // namespace tdep
