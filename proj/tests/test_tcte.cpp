#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "tdep/rng.hpp"
#include "tdep/samplers.hpp"
#include "tdep/tcte.hpp"

using namespace tdep;

namespace {

RankedSample random_permutation_sample(std::size_t n, std::mt19937_64& gen) {
    std::vector<std::uint32_t> x(n), y(n);
    std::iota(x.begin(), x.end(), 1u);
    std::iota(y.begin(), y.end(), 1u);
    std::shuffle(x.begin(), x.end(), gen);
    std::shuffle(y.begin(), y.end(), gen);
    return RankedSample(x, y);
}

RankedSample comonotone(std::size_t n) {
    std::vector<std::uint32_t> r(n);
    std::iota(r.begin(), r.end(), 1u);
    return RankedSample(r, r);
}

}  // namespace

TEST(TcteHat, ComonotoneHandValue) {
    EXPECT_DOUBLE_EQ(tcte_hat(comonotone(4), 0.5, Direction::YtoX).value, 0.375);
}

TEST(TcteHat, FullThresholdGivesMidRank) {
    std::mt19937_64 gen(1);
    for (std::size_t n : {2u, 5u, 17u, 300u}) {
        const auto s = random_permutation_sample(n, gen);
        const double expected = static_cast<double>(n + 1) / (2.0 * n);
        EXPECT_DOUBLE_EQ(tcte_hat(s, 1.0, Direction::YtoX).value, expected);
        EXPECT_DOUBLE_EQ(tcte_hat(s, 1.0, Direction::XtoY).value, expected);
    }
}

TEST(TcteHat, EqualsConditionalMeanExactlyOnGrid) {
    std::mt19937_64 gen(2024);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + trial % 11;
        const auto s = random_permutation_sample(n, gen);
        for (std::size_t k = 1; k <= n; ++k) {
            const double v = static_cast<double>(k) / static_cast<double>(n);
            const auto yx = oracle::conditional_mean_rank(s.x_ranks(), s.y_ranks(), k);
            const auto xy = oracle::conditional_mean_rank(s.y_ranks(), s.x_ranks(), k);
            EXPECT_EQ(tcte_hat(s, v, Direction::YtoX).value, yx.value());
            EXPECT_EQ(tcte_hat(s, v, Direction::XtoY).value, xy.value());
        }
    }
}

TEST(TcteHat, OffGridDiffersFromConditionalMeanByAtMostOneOverVn) {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 5 + trial % 40;
        const auto s = random_permutation_sample(n, gen);
        const double v = std::max(unif(gen), 1.0 / static_cast<double>(n));
        const std::size_t k = rank_floor(v, n);
        const double mean = oracle::conditional_mean_rank(s.x_ranks(), s.y_ranks(), k).value();
        EXPECT_LE(std::abs(tcte_hat(s, v, Direction::YtoX).value - mean), 1.0 / (v * n) + 1e-12);
    }
}

TEST(TcteHat, RejectsEmptyConditioningSet) {
    const auto s = comonotone(10);
    EXPECT_THROW(tcte_hat(s, 0.05, Direction::YtoX), ValidationError);
    EXPECT_THROW(tcte_hat(s, 0.0, Direction::YtoX), ValidationError);
    EXPECT_THROW(tcte_hat(s, 1.2, Direction::YtoX), ValidationError);
    EXPECT_NO_THROW(tcte_hat(s, 0.1, Direction::YtoX));
}

TEST(TcteHat, CarriesMetadata) {
    const auto s = upper_tail_view(comonotone(10));
    const auto e = tcte_hat(s, 0.3, Direction::XtoY);
    EXPECT_EQ(e.tail, Tail::upper);
    EXPECT_EQ(e.direction, Direction::XtoY);
    EXPECT_EQ(e.n, 10u);
    EXPECT_EQ(e.v, 0.3);
}

TEST(TcteHat, IndependentSamplesAverageOneHalf) {
    const std::size_t n = 2000;
    const double v = resolve_threshold(ThresholdPolicy::sqrt_log(), n);
    double sum = 0.0;
    const int reps = 200;
    for (int r = 0; r < reps; ++r) {
        Rng rng = Rng::stream(77, {static_cast<std::uint64_t>(r)});
        const auto p = sample(CopulaModel::independence(), n, rng);
        sum += tcte_hat(rank_transform(p.u, p.v), v, Direction::YtoX).value;
    }
    // Per-replication sd is about sqrt(sigma2 / n) ~ 0.04.
    EXPECT_NEAR(sum / reps, 0.5, 0.01);
}

TEST(DtdHat, Antisymmetry) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const auto s = random_permutation_sample(20 + trial % 50, gen);
        const double u = unif(gen), v = unif(gen);
        EXPECT_EQ(dtd_hat(s, u, v), -dtd_hat(s.swapped(), v, u));
        EXPECT_EQ(dtd_hat(s, v), -dtd_hat(s.swapped(), v));
    }
}

TEST(DtdHat, ZeroOnSwapInvariantPointSets) {
    std::mt19937_64 gen(9);
    for (int trial = 0; trial < 200; ++trial) {
        // An involution sigma gives the point set {(i, sigma(i))}, closed under swapping coordinates.
        const std::size_t n = 4 + trial % 60;
        std::vector<std::uint32_t> idx(n);
        std::iota(idx.begin(), idx.end(), 1u);
        std::shuffle(idx.begin(), idx.end(), gen);
        std::vector<std::uint32_t> sigma(n + 1);
        std::iota(sigma.begin(), sigma.end(), 0u);
        for (std::size_t k = 0; k + 1 < n; k += 2)
            if (gen() % 3) std::swap(sigma[idx[k]], sigma[idx[k + 1]]);
        std::vector<std::uint32_t> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = static_cast<std::uint32_t>(i + 1);
            y[i] = sigma[i + 1];
        }
        const RankedSample s(x, y);
        const double v = (1.0 + gen() % n) / static_cast<double>(n);
        EXPECT_EQ(dtd_hat(s, v), 0.0);
    }
}

TEST(DtdHat, ScaleInvariance) {
    std::mt19937_64 gen(10);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x(80), y(80), gx(80), hy(80);
        for (std::size_t i = 0; i < 80; ++i) {
            x[i] = z(gen);
            y[i] = 0.6 * x[i] + z(gen);
            gx[i] = std::pow(x[i], 3) - 1.0;
            hy[i] = std::exp(2.0 * y[i]);
        }
        EXPECT_EQ(dtd_hat(rank_transform(x, y), 0.2), dtd_hat(rank_transform(gx, hy), 0.2));
    }
}

TEST(ResolveThreshold, Policies) {
    EXPECT_NEAR(resolve_threshold(ThresholdPolicy::sqrt_log(), 1000), 0.0831129, 1e-7);
    EXPECT_NEAR(resolve_threshold(ThresholdPolicy::inv_sqrt(), 1000), 0.0316228, 1e-7);
    EXPECT_EQ(resolve_threshold(ThresholdPolicy::fixed(0.3), 57), 0.3);
    EXPECT_EQ(resolve_threshold(ThresholdPolicy::sqrt_log(), 2), 1.0 * std::sqrt(std::log(2.0) / 2.0));
    for (std::size_t n = 2; n < 5000; n += 37) {
        const double v = resolve_threshold(ThresholdPolicy::sqrt_log(), n);
        EXPECT_GT(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    EXPECT_THROW(resolve_threshold(ThresholdPolicy::sqrt_log(), 1), ValidationError);
}

TEST(ThresholdPolicy, ParseAndName) {
    EXPECT_EQ(ThresholdPolicy::parse("sqrtlog"), ThresholdPolicy::sqrt_log());
    EXPECT_EQ(ThresholdPolicy::parse("invsqrt"), ThresholdPolicy::inv_sqrt());
    EXPECT_EQ(ThresholdPolicy::parse("0.25").fixed_value(), 0.25);
    EXPECT_EQ(ThresholdPolicy::parse("0.25").name(), "0.25");
    EXPECT_EQ(ThresholdPolicy::sqrt_log().name(), "sqrtlog");
    EXPECT_THROW(ThresholdPolicy::parse("abc"), ValidationError);
    EXPECT_THROW(ThresholdPolicy::parse("0.5x"), ValidationError);
    EXPECT_THROW(ThresholdPolicy::parse("0"), ValidationError);
    EXPECT_THROW(ThresholdPolicy::fixed(1.5), ValidationError);
}

TEST(TcteHat, ConsistencyAcrossSampleSizes) {
    const auto model = CopulaModel::clayton(2.0);
    const double v = 0.1;
    const double truth = oracle::tcte([&](double a, double b) { return model.value(a, b); }, v);
    std::vector<double> rmse;
    for (std::size_t n : {250u, 1000u, 4000u}) {
        double se = 0.0;
        const int reps = 200;
        for (int r = 0; r < reps; ++r) {
            Rng rng = Rng::stream(5, {n, static_cast<std::uint64_t>(r)});
            const auto p = sample(model, n, rng);
            const double e = tcte_hat(rank_transform(p.u, p.v), v, Direction::YtoX).value - truth;
            se += e * e;
        }
        rmse.push_back(std::sqrt(se / reps));
    }
    EXPECT_GT(rmse[0], rmse[1]);
    EXPECT_GT(rmse[1], rmse[2]);
}
