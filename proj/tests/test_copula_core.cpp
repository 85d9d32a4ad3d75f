#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "tdep/copula_core.hpp"
#include "tdep/rng.hpp"

using namespace tdep;

namespace {

RankedSample from_ranks(std::vector<std::uint32_t> x, std::vector<std::uint32_t> y) {
    return RankedSample(std::move(x), std::move(y));
}

RankedSample comonotone(std::size_t n) {
    std::vector<std::uint32_t> r(n);
    std::iota(r.begin(), r.end(), 1u);
    return from_ranks(r, r);
}

RankedSample countermonotone(std::size_t n) {
    std::vector<std::uint32_t> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = static_cast<std::uint32_t>(i + 1);
        y[i] = static_cast<std::uint32_t>(n - i);
    }
    return from_ranks(x, y);
}

RankedSample random_sample(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform();
        y[i] = rng.uniform();
    }
    return rank_transform(x, y);
}

}  // namespace

TEST(RankTransform, PermutationExample) {
    const std::vector<double> x{3.0, 1.0, 2.0}, y{10, 30, 20};
    const auto r = rank_transform(x, y);
    EXPECT_EQ(r.x_ranks(), (std::vector<std::uint32_t>{3, 1, 2}));
    EXPECT_EQ(r.y_ranks(), (std::vector<std::uint32_t>{1, 3, 2}));
    EXPECT_DOUBLE_EQ(r.rx(1), 1.0 / 3.0);
    EXPECT_TRUE(r.warnings().empty());
}

TEST(RankTransform, IdentityIsComonotone) {
    std::vector<double> x(7);
    std::iota(x.begin(), x.end(), 0.5);
    const auto r = rank_transform(x, x);
    EXPECT_EQ(r.x_ranks(), r.y_ranks());
    for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(r.x_rank(i), i + 1);
}

TEST(RankTransform, TiesBrokenByFirstOccurrence) {
    const std::vector<double> x{5, 5, 1}, y{1, 2, 3};
    const auto r = rank_transform(x, y);
    EXPECT_EQ(r.x_ranks(), (std::vector<std::uint32_t>{2, 3, 1}));
    EXPECT_EQ(r.x_ties(), 1u);
    EXPECT_EQ(r.y_ties(), 0u);
    ASSERT_EQ(r.warnings().size(), 1u);
}

TEST(RankTransform, MatchesBruteForceRanks) {
    std::mt19937_64 gen(11);
    std::uniform_int_distribution<int> small(0, 5);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + trial % 20;
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = small(gen);
            y[i] = small(gen) * 0.5;
        }
        const auto r = rank_transform(x, y);
        EXPECT_EQ(r.x_ranks(), oracle::ranks(x));
        EXPECT_EQ(r.y_ranks(), oracle::ranks(y));
    }
}

TEST(RankTransform, InvariantUnderIncreasingMaps) {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(50), y(50), gx(50), hy(50);
        for (std::size_t i = 0; i < 50; ++i) {
            x[i] = z(gen);
            y[i] = z(gen);
            gx[i] = std::exp(x[i]) + 3.0;
            hy[i] = std::atan(y[i]) * 7.0 - 2.0;
        }
        EXPECT_EQ(rank_transform(x, y), rank_transform(gx, hy));
    }
}

TEST(RankTransform, RejectsBadInput) {
    const std::vector<double> a{1, 2, 3}, b{1, 2};
    EXPECT_THROW(rank_transform(a, b), ValidationError);
    const std::vector<double> one{1};
    EXPECT_THROW(rank_transform(one, one), ValidationError);
    const std::vector<double> bad{1, NAN, 3};
    EXPECT_THROW(rank_transform(a, bad), ValidationError);
    EXPECT_THROW(from_ranks({1, 1}, {1, 2}), ValidationError);
}

TEST(UpperTailView, IsAnInvolution) {
    const auto s = random_sample(40, 3);
    const auto up = upper_tail_view(s);
    EXPECT_EQ(up.tail(), Tail::upper);
    EXPECT_EQ(upper_tail_view(up), s);
    const auto cm = upper_tail_view(comonotone(9));
    EXPECT_EQ(cm.x_ranks(), cm.y_ranks());
    const auto c = countermonotone(9);
    const auto cu = upper_tail_view(c);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(cu.x_rank(i) + cu.y_rank(i), 10u);
}

TEST(RankFloor, AgreesWithScaledRanks) {
    for (std::size_t n : {3u, 7u, 10u, 1000u})
        for (std::size_t k = 0; k <= n; ++k) {
            const double t = static_cast<double>(k) / static_cast<double>(n);
            EXPECT_EQ(rank_floor(t, n), k);
            if (k < n) {
                const double next = static_cast<double>(k + 1) / static_cast<double>(n);
                EXPECT_EQ(rank_floor(std::nextafter(next, 0.0), n), k);
            }
        }
    EXPECT_EQ(rank_floor(-0.1, 5), 0u);
    EXPECT_EQ(rank_floor(1.5, 5), 5u);
}

TEST(EmpiricalCopula, BoundaryValues) {
    const EmpiricalCopula ec(random_sample(30, 8));
    EXPECT_EQ(ec.eval(0.0, 0.5), 0.0);
    EXPECT_EQ(ec.eval(0.5, 0.0), 0.0);
    EXPECT_EQ(ec.eval(1.0, 1.0), 1.0);
    EXPECT_THROW(ec.eval(1.1, 0.5), ValidationError);
    EXPECT_THROW(ec.eval(0.5, -0.1), ValidationError);
}

TEST(EmpiricalCopula, ComonotoneHandCount) {
    const EmpiricalCopula ec(comonotone(3));
    EXPECT_DOUBLE_EQ(ec.eval(1.0 / 3.0, 2.0 / 3.0), 1.0 / 3.0);
}

TEST(EmpiricalCopula, MatchesDirectCount) {
    for (std::size_t n : {25u, 5000u}) {
        const auto s = random_sample(n, 21 + n);
        const EmpiricalCopula ec(s);
        Rng rng(99);
        for (int q = 0; q < 300; ++q) {
            const double u = rng.uniform(), v = rng.uniform();
            std::size_t cnt = 0;
            for (std::size_t i = 0; i < n; ++i) cnt += (s.rx(i) <= u && s.ry(i) <= v);
            EXPECT_EQ(ec.eval(u, v), static_cast<double>(cnt) / static_cast<double>(n));
        }
    }
}

TEST(EmpiricalCopula, MonotoneAndTwoIncreasing) {
    const std::size_t n = 60;
    const EmpiricalCopula ec(random_sample(n, 17));
    const std::size_t g = 25;
    for (std::size_t i = 0; i < g; ++i)
        for (std::size_t j = 0; j < g; ++j) {
            const double u1 = double(i) / g, u2 = double(i + 1) / g, v1 = double(j) / g, v2 = double(j + 1) / g;
            EXPECT_GE(ec.eval(u2, v1), ec.eval(u1, v1));
            EXPECT_GE(ec.eval(u1, v2), ec.eval(u1, v1));
            EXPECT_GE(ec.eval(u2, v2) - ec.eval(u1, v2) - ec.eval(u2, v1) + ec.eval(u1, v1), -1e-15);
            const double val = ec.eval(u1, v1) * n;
            EXPECT_DOUBLE_EQ(val, std::round(val));
        }
}

TEST(EmpiricalCopula, DerivativeBranches) {
    const EmpiricalCopula ec(random_sample(400, 4));
    const double h = ec.bandwidth();
    EXPECT_DOUBLE_EQ(h, 1.0 / 20.0);
    const double v = 0.37;
    EXPECT_EQ(ec.partial_derivative(Argument::first, 0.01, v), ec.value(2 * h, v) / (2 * h));
    EXPECT_EQ(ec.partial_derivative(Argument::first, 0.5, v), (ec.value(0.5 + h, v) - ec.value(0.5 - h, v)) / (2 * h));
    EXPECT_EQ(ec.partial_derivative(Argument::first, 0.99, v), (ec.value(1.0, v) - ec.value(1.0 - 2 * h, v)) / (2 * h));
    EXPECT_EQ(ec.partial_derivative(Argument::second, v, 0.01), ec.value(v, 2 * h) / (2 * h));
    Rng rng(3);
    for (int q = 0; q < 200; ++q) {
        const double a = ec.d1(rng.uniform(), rng.uniform());
        EXPECT_GE(a, -1.0 / (2 * h));
        EXPECT_LE(a, 1.0 / (2 * h));
    }
}

TEST(EmpiricalCopula, DerivativesOfLargeIndependentSample) {
    const EmpiricalCopula ec(random_sample(40000, 12));
    const double tol = 4.0 * std::pow(40000.0, -0.25);
    EXPECT_NEAR(ec.d1(0.5, 0.5), 0.5, tol);
    EXPECT_NEAR(ec.d2(0.3, 0.7), 0.3, tol);
    const EmpiricalCopula co(comonotone(400));
    EXPECT_NEAR(co.d1(0.9, 0.5), 0.0, 1e-12);
}

TEST(EmpiricalCopula, CustomBandwidth) {
    const EmpiricalCopula ec(random_sample(100, 2), 0.2);
    EXPECT_DOUBLE_EQ(ec.bandwidth(), 0.2);
    EXPECT_THROW(EmpiricalCopula(random_sample(10, 2), 0.0), ValidationError);
}

TEST(QuadrantStatus, MonotoneSamples) {
    EXPECT_EQ(quadrant_status(EmpiricalCopula(comonotone(200))).verdict, QuadrantVerdict::pqd);
    EXPECT_EQ(quadrant_status(EmpiricalCopula(countermonotone(200))).verdict, QuadrantVerdict::nqd);
    const auto st = quadrant_status(EmpiricalCopula(comonotone(200)));
    EXPECT_GE(st.max_negative_gap, -st.tolerance);
    EXPECT_DOUBLE_EQ(st.tolerance, 2.0 / std::sqrt(200.0));
    EXPECT_THROW(quadrant_status(EmpiricalCopula(comonotone(5)), 1), ValidationError);
}

TEST(QuadrantStatus, IndependentSamplesMostlyIndeterminate) {
    int indeterminate = 0;
    for (std::uint64_t r = 0; r < 100; ++r)
        indeterminate += quadrant_status(EmpiricalCopula(random_sample(500, 1000 + r))).verdict ==
                         QuadrantVerdict::indeterminate;
    EXPECT_GE(indeterminate, 50);
}
