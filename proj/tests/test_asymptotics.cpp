#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "tdep/analytic_models.hpp"
#include "tdep/asymptotics.hpp"
#include "tdep/samplers.hpp"

using namespace tdep;

namespace {

oracle::CopulaFn fn(const CopulaModel& m) {
    return [m](double a, double b) { return m.value(a, b); };
}

RankedSample draw(const Generator& g, std::size_t n, std::uint64_t seed) {
    const auto p = sample(SimulationConfig{g, n, seed});
    return rank_transform(p.u, p.v);
}

}  // namespace

TEST(Sigma2, IndependenceClosedForm) {
    const auto m = CopulaModel::independence();
    for (double v : {0.05, 0.1, 0.3, 0.5, 1.0})
        EXPECT_NEAR(sigma2(m, v, 400), oracle::sigma2_independence(v), 1e-4) << "v=" << v;
}

TEST(Sigma2, FgmClosedForm) {
    for (double theta : {-1.0, -0.4, 0.5, 1.0}) {
        const auto m = CopulaModel::fgm(theta);
        for (double v : {0.05, 0.1, 0.3, 0.5, 1.0})
            EXPECT_NEAR(sigma2(m, v, 400), oracle::sigma2_fgm(theta, v), 1e-4) << theta << " " << v;
    }
}

TEST(Sigma2, FunctionEvaluatorMatchesModel) {
    const auto m = CopulaModel::frank(3.0);
    const FunctionEvaluator f{[&](double a, double b) { return m.value(a, b); },
                              [&](double a, double b) { return m.d1(a, b); },
                              [&](double a, double b) { return m.d2(a, b); }};
    EXPECT_EQ(sigma2(f, 0.2, 100), sigma2(m, 0.2, 100));
}

TEST(Sigma2, AgreesWithGenericCovarianceOracle) {
    const std::vector<CopulaModel> models{CopulaModel::gaussian(0.5), CopulaModel::clayton(2.0),
                                          CopulaModel::frank(-4.0),
                                          CopulaModel::khoudraji(CopulaModel::clayton(3.0), 0.4),
                                          CopulaModel::khoudraji(CopulaModel::gaussian(0.75), 0.2)};
    for (const auto& m : models)
        for (double v : {0.1, 0.4, 0.8}) {
            EXPECT_NEAR(sigma2(m, v, 400), oracle::tcte_variance(fn(m), v), 2e-4) << m.name() << " v=" << v;
            EXPECT_NEAR(sigma2_permuted(m, v, 400), oracle::tcte_variance_permuted(fn(m), v), 2e-4)
                << m.name() << " v=" << v;
        }
}

TEST(Sigma2, PermutedEqualsSigma2ForExchangeableModels) {
    for (const auto& m : {CopulaModel::gaussian(0.3), CopulaModel::clayton(1.5), CopulaModel::fgm(0.7)})
        EXPECT_NEAR(sigma2_permuted(m, 0.25, 200), sigma2(m, 0.25, 200), 1e-12);
    const auto k = CopulaModel::khoudraji(CopulaModel::clayton(3.0), 0.5);
    EXPECT_GT(std::abs(sigma2_permuted(k, 0.1, 200) - sigma2(k, 0.1, 200)), 1e-3);
}

TEST(Sigma2, RejectsBadArguments) {
    const auto m = CopulaModel::independence();
    EXPECT_THROW(sigma2(m, 0.0), ValidationError);
    EXPECT_THROW(sigma2(m, 0.5, 4), ValidationError);
    EXPECT_THROW(cov_V(m, 1.5, 0.5), ValidationError);
}

TEST(CovV, ClosedForms) {
    const auto ind = CopulaModel::independence();
    for (double u : {0.05, 0.3, 0.7})
        for (double v : {0.1, 0.5, 1.0})
            EXPECT_NEAR(cov_V(ind, u, v, 200), oracle::cross_independence(u, v), 1e-6) << u << " " << v;
    const auto fgm = CopulaModel::fgm(1.0);
    EXPECT_NEAR(cov_V(fgm, 0.5, 0.5, 200), -5.0 / 96.0, 1e-6);
    EXPECT_NEAR(cov_V(fgm, 0.1, 0.3, 200), -0.13475, 1e-6);
}

TEST(CovV, AgreesWithGenericCovarianceOracle) {
    const std::vector<CopulaModel> models{CopulaModel::gaussian(-0.4), CopulaModel::clayton(1.0),
                                          CopulaModel::khoudraji(CopulaModel::frank(5.0), 0.6)};
    for (const auto& m : models)
        for (auto [u, v] : {std::pair{0.1, 0.1}, std::pair{0.3, 0.7}, std::pair{0.9, 0.2}})
            EXPECT_NEAR(cov_V(m, u, v, 200), oracle::cross_term(fn(m), u, v), 2e-4) << m.name() << u << v;
}

TEST(CovV, MatchesMonteCarloCovarianceOfEstimators) {
    // -n Cov(chi_yx, chi_xy) over replications versus the asymptotic cross term.
    const auto m = CopulaModel::fgm(1.0);
    const std::size_t n = 1000, reps = 10000;
    const double u = 0.5, v = 0.5;
    std::vector<double> a(reps), b(reps);
    for (std::size_t r = 0; r < reps; ++r) {
        Rng rng = Rng::stream(31, {r});
        const auto p = sample(m, n, rng);
        const auto s = rank_transform(p.u, p.v);
        a[r] = tcte_hat(s, v, Direction::YtoX).value;
        b[r] = tcte_hat(s, u, Direction::XtoY).value;
    }
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / reps;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / reps;
    std::vector<double> prod(reps);
    for (std::size_t r = 0; r < reps; ++r) prod[r] = (a[r] - ma) * (b[r] - mb) * n;
    const double cov = std::accumulate(prod.begin(), prod.end(), 0.0) / (reps - 1);
    double ss = 0.0;
    for (double x : prod) ss += (x - cov) * (x - cov);
    const double se = std::sqrt(ss / (reps - 1) / reps);
    EXPECT_NEAR(-cov, -5.0 / 96.0, 3.0 * se + 0.005);
}

TEST(VarianceReport, TotalAndClamp) {
    const auto m = CopulaModel::clayton(2.0);
    const auto r = variance_report(m, 0.2, 0.3, 100);
    EXPECT_DOUBLE_EQ(r.raw_total, r.sigma2_C + r.sigma2_CP + 2.0 * r.cov_V);
    EXPECT_FALSE(r.clamped);
    Warnings w;
    const auto c = variance_report(CopulaModel::independence(), 1.0, 1.0, 50, &w);
    EXPECT_TRUE(c.clamped);
    EXPECT_EQ(c.total, variance_floor);
    EXPECT_EQ(w.size(), 1u);
}

TEST(VarianceReport, EmpiricalPlugInConsistent) {
    const auto m = CopulaModel::khoudraji(CopulaModel::gaussian(0.75), 0.3);
    const auto s = draw(m, 4000, 12);
    const EmpiricalCopula ec(s);
    const auto emp = variance_report(ec, 0.2, 0.2, 100);
    const auto th = variance_report(m, 0.2, 0.2, 200);
    EXPECT_NEAR(emp.sigma2_C, th.sigma2_C, 0.2 * th.sigma2_C);
    EXPECT_NEAR(emp.sigma2_CP, th.sigma2_CP, 0.2 * th.sigma2_CP);
    EXPECT_NEAR(emp.cov_V, th.cov_V, 0.03);
}

TEST(TestTcte, StatisticDefinition) {
    const auto s = draw(CopulaModel::clayton(1.0), 500, 3);
    const auto r = test_tcte(s, 0.2, Direction::XtoY, 100);
    EXPECT_FALSE(r.degenerate);
    EXPECT_DOUBLE_EQ(r.std_err, std::sqrt(r.sigma2 / 500.0));
    EXPECT_DOUBLE_EQ(r.z, (r.estimate.value - 0.5) / r.std_err);
    EXPECT_NEAR(r.p_value, std::erfc(std::abs(r.z) / std::sqrt(2.0)), 1e-15);
    EXPECT_LT(r.z, 0.0);
}

TEST(TestDtd, DecompositionAndStatistic) {
    const auto s = draw(CopulaModel::khoudraji(CopulaModel::clayton(3.0), 0.5), 800, 4);
    const auto r = test_dtd(s, 0.15, 0.1, 100);
    EXPECT_EQ(r.n, 800u);
    EXPECT_EQ(r.chi_yx, tcte_hat(s, 0.1, Direction::YtoX).value);
    EXPECT_EQ(r.chi_xy, tcte_hat(s, 0.15, Direction::XtoY).value);
    EXPECT_EQ(r.chi_diff, r.chi_yx - r.chi_xy);
    EXPECT_DOUBLE_EQ(r.z, std::sqrt(800.0) * r.chi_diff / std::sqrt(r.variance.total));
    EXPECT_NEAR(r.p_value, std::erfc(std::abs(r.z) / std::sqrt(2.0)), 1e-15);
    EXPECT_EQ(r.quadrant.verdict, QuadrantVerdict::pqd);
    EXPECT_FALSE(r.degenerate);
    EXPECT_DOUBLE_EQ(r.yx_vs_half.z, std::sqrt(800.0) * (r.chi_yx - 0.5) / std::sqrt(r.variance.sigma2_C));
}

TEST(TestDtd, ExchangeableSampleHasZeroStatistic) {
    std::vector<std::uint32_t> r(50);
    std::iota(r.begin(), r.end(), 1u);
    const RankedSample s(r, r);
    const auto t = test_dtd(s, 0.2, std::size_t{100});
    EXPECT_EQ(t.chi_diff, 0.0);
    EXPECT_EQ(t.z, 0.0);
    EXPECT_EQ(t.p_value, 1.0);
}

TEST(TestDtd, SizeNearNominalUnderIndependence) {
    int rejections = 0;
    const int reps = 300;
    for (int r = 0; r < reps; ++r) {
        const auto s = draw(CopulaModel::independence(), 500, 900 + r);
        rejections += test_dtd(s, resolve_threshold(ThresholdPolicy::sqrt_log(), 500), std::size_t{60}).p_value <= 0.05;
    }
    EXPECT_LT(rejections, 0.05 * reps + 4.0 * std::sqrt(0.05 * 0.95 * reps));
}
