#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "tdep/mc_lab.hpp"

using namespace tdep;

namespace {

ExperimentSpec parse(const std::string& text) {
    std::istringstream in(text);
    return parse_spec(in);
}

const ResultRow& find_row(const ExperimentResult& r, const std::string& direction, const std::string& policy = "") {
    for (const auto& row : r.rows)
        if (row.direction == direction && (policy.empty() || row.policy == policy)) return row;
    throw std::runtime_error("row not found");
}

}  // namespace

TEST(ParseSpec, ReadsAllKeys) {
    const auto s = parse(R"(# table two
family = khoudraji-gaussian, skew-t
rho = 0.25, 0.75
theta = 2
delta = 0.1,0.5
alpha = 1.46
alpha2 = -1
nu = 3
n = 100, 1000
replications = 50
policies = sqrtlog, invsqrt, 0.2
metrics = bias, power
level = 0.01
seed = 17
output = out.csv
grid = 64
truth = montecarlo
truth_samples = 5000
threads = 2
)");
    EXPECT_EQ(s.families, (std::vector<std::string>{"khoudraji-gaussian", "skew-t"}));
    EXPECT_EQ(s.rho, (std::vector<double>{0.25, 0.75}));
    EXPECT_EQ(s.delta, (std::vector<double>{0.1, 0.5}));
    EXPECT_EQ(s.alpha1, (std::vector<double>{1.46}));
    ASSERT_TRUE(s.alpha2.has_value());
    EXPECT_EQ(*s.alpha2, (std::vector<double>{-1.0}));
    EXPECT_EQ(s.n_values, (std::vector<std::size_t>{100, 1000}));
    EXPECT_EQ(s.replications, 50u);
    ASSERT_EQ(s.policies.size(), 3u);
    EXPECT_EQ(s.policies[2].name(), "0.2");
    EXPECT_TRUE(s.bias);
    EXPECT_FALSE(s.rmse);
    EXPECT_TRUE(s.power);
    EXPECT_EQ(s.level, 0.01);
    EXPECT_EQ(s.seed, 17u);
    EXPECT_EQ(s.output, "out.csv");
    EXPECT_EQ(s.grid, 64u);
    EXPECT_EQ(s.truth, TruthSource::monte_carlo);
    EXPECT_EQ(s.truth_samples, 5000u);
    EXPECT_EQ(s.threads, 2u);
}

TEST(ParseSpec, RejectsMalformedInput) {
    EXPECT_THROW(parse("rho = 0.5\n"), ValidationError);
    EXPECT_THROW(parse("family = gaussian\ncolour = red\n"), ValidationError);
    EXPECT_THROW(parse("family = gumbel\n"), ValidationError);
    EXPECT_THROW(parse("family = gaussian\nrho 0.5\n"), ValidationError);
    EXPECT_THROW(parse("family = gaussian\nrho = 0.5x\n"), ValidationError);
    EXPECT_THROW(parse("family = gaussian\nn = 1\n"), ValidationError);
    EXPECT_THROW(parse("family = gaussian\nmetrics = speed\n"), ValidationError);
    EXPECT_THROW(parse("family = gaussian\nlevel = 1\n"), ValidationError);
    EXPECT_THROW(parse_spec_file("/nonexistent/spec.txt"), IoError);
}

TEST(ExpandCells, OnlyRelevantParametersMultiply) {
    const auto s = parse("family = gaussian, clayton, khoudraji-frank, independence\nrho = 0.1,0.2\n"
                         "theta = 1,2,3\ndelta = 0.3,0.6\n");
    const auto cells = expand_cells(s);
    // 2 gaussian + 3 clayton + 3*2 khoudraji-frank + 1 independence
    EXPECT_EQ(cells.size(), 12u);
    EXPECT_TRUE(std::isnan(cells[0].theta));
    EXPECT_EQ(cells.back().family, "independence");
}

TEST(MakeGenerator, BuildsNamedModels) {
    EXPECT_EQ(generator_name(make_generator("khoudraji-clayton", 0, 3, 0.5, 0, 0, 3)),
              generator_name(CopulaModel::khoudraji(CopulaModel::clayton(3.0), 0.5)));
    EXPECT_TRUE(std::holds_alternative<SkewTParams>(make_generator("skew-t", 0.25, 0, 0, 1, -1, 3)));
    EXPECT_THROW(make_generator("khoudraji-gumbel", 0, 1, 0.5, 0, 0, 3), ValidationError);
    EXPECT_THROW(make_generator("gaussian", 1.5, 0, 0, 0, 0, 3), ValidationError);
}

TEST(TruthValue, AnalyticAgreesWithMonteCarlo) {
    Cell c;
    c.generator = CopulaModel::khoudraji(CopulaModel::clayton(3.0), 0.5);
    for (Direction d : {Direction::YtoX, Direction::XtoY}) {
        const auto a = truth_value(c, 0.05, d);
        const auto m = truth_value(c, 0.05, d, TruthSource::monte_carlo, 2'000'000, 3);
        EXPECT_FALSE(a.monte_carlo);
        EXPECT_TRUE(m.monte_carlo);
        EXPECT_GT(m.std_err, 0.0);
        EXPECT_NEAR(a.value, m.value, 4.0 * m.std_err);
    }
    Cell ind;
    EXPECT_DOUBLE_EQ(truth_value(ind, 0.3, Direction::YtoX).value, 0.5);
    Cell st;
    st.generator = SkewTParams{0.25, 1.0, -1.0, 3.0};
    EXPECT_THROW(truth_value(st, 0.1, Direction::YtoX, TruthSource::analytic), ValidationError);
}

TEST(Run, DeterministicAndConsistentMetrics) {
    const auto spec = parse("family = clayton, fgm\ntheta = 1\nn = 200, 400\nreplications = 40\n"
                            "policies = sqrtlog, 0.25\nseed = 5\nthreads = 3\n");
    const auto a = run(spec), b = run(spec);
    std::ostringstream sa, sb;
    write_csv(sa, a);
    write_csv(sb, b);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_EQ(a.rows.size(), 2u * 2u * 2u * 3u);
    for (const auto& row : a.rows) {
        EXPECT_EQ(row.status, "ok");
        EXPECT_EQ(row.replications, 40u);
        EXPECT_GE(row.rmse + 1e-15, std::abs(row.bias));
        EXPECT_TRUE(std::isnan(row.power));
    }
    for (std::size_t i = 0; i + 2 < a.rows.size(); i += 3) {
        EXPECT_NEAR(a.rows[i + 2].mean, a.rows[i].mean - a.rows[i + 1].mean, 1e-12);
        EXPECT_NEAR(a.rows[i + 2].truth.value, a.rows[i].truth.value - a.rows[i + 1].truth.value, 1e-15);
    }
}

TEST(Run, CsvLayout) {
    const auto spec = parse("family = independence\nn = 50\nreplications = 3\n");
    std::ostringstream os;
    write_csv(os, run(spec));
    std::istringstream in(os.str());
    std::string header, line;
    std::getline(in, header);
    EXPECT_EQ(header,
              "family,rho,theta,delta,alpha1,alpha2,nu,n,policy,v,direction,replications,truth,truth_se,"
              "truth_source,mean,bias,rmse,power,status");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 19) << line;
        EXPECT_NE(line.find("analytic"), std::string::npos);
        EXPECT_EQ(line.substr(line.size() - 3), ",ok");
    }
    EXPECT_EQ(rows, 3);
}

TEST(Run, FailedCellIsReportedNotThrown) {
    // v = 0.2 with n = 3 leaves no observation below the threshold.
    const auto spec = parse("family = gaussian\nrho = 0.5\nn = 3, 100\nreplications = 4\npolicies = 0.2\n");
    const auto r = run(spec);
    ASSERT_EQ(r.rows.size(), 6u);
    EXPECT_EQ(r.rows[0].status.rfind("failed: replication 0", 0), 0u) << r.rows[0].status;
    EXPECT_EQ(r.rows[3].status, "ok");
    std::ostringstream os;
    write_csv(os, r);
    EXPECT_NE(os.str().find(",\"failed: replication 0"), std::string::npos);
}

TEST(Run, SizeUnderIndependence) {
    const auto spec = parse("family = independence\nn = 500\nreplications = 400\nmetrics = power\n"
                            "grid = 50\nseed = 21\n");
    const auto r = run(spec);
    const double size = find_row(r, "diff").power;
    EXPECT_NEAR(size, 0.05, 4.0 * std::sqrt(0.05 * 0.95 / 400));
    EXPECT_TRUE(std::isnan(find_row(r, "diff").bias));
}

TEST(Run, PowerGrowsWithSampleSize) {
    const auto spec = parse("family = khoudraji-clayton\ntheta = 3\ndelta = 0.5\nn = 100, 400, 1600\n"
                            "replications = 60\nmetrics = power\ngrid = 50\nseed = 8\n");
    const auto r = run(spec);
    std::vector<double> power;
    for (const auto& row : r.rows)
        if (row.direction == "diff") power.push_back(row.power);
    ASSERT_EQ(power.size(), 3u);
    EXPECT_LE(power[0], power[1]);
    EXPECT_LE(power[1], power[2]);
    EXPECT_GT(power[2], 0.8);
}

TEST(Run, MonteCarloTruthFlaggedForSkewT) {
    const auto spec = parse("family = skew-t\nrho = 0.25\nalpha = 2\nn = 300\nreplications = 5\n"
                            "truth_samples = 200000\n");
    const auto r = run(spec);
    for (const auto& row : r.rows) {
        EXPECT_TRUE(row.truth.monte_carlo);
        EXPECT_GT(row.truth.std_err, 0.0);
        EXPECT_EQ(row.cell.alpha2, -2.0);
    }
    EXPECT_GT(find_row(r, "diff").truth.value, 0.0);
}
