#pragma once

// Pairwise DTD tests over a set of variables and the directed graph of
// significant links.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdep/asymptotics.hpp"
#include "tdep/concurrency.hpp"
#include "tdep/copula_core.hpp"
#include "tdep/error.hpp"
#include "tdep/tcte.hpp"

namespace tdep {

enum class NetworkMode { intersection, single };

struct NetworkOptions {
    double alpha = 0.05;
    Tail tail = Tail::upper;
    NetworkMode mode = NetworkMode::intersection;
    bool bonferroni = false;
    std::size_t grid = default_quadrature_grid;
    std::size_t threads = 1;
};

/// Named column of observations; NaN marks a missing value.
struct NamedSeries {
    std::string name;
    std::vector<double> values;
};

struct PolicyOutcome {
    std::string policy;
    double v = 0.0;
    DtdTestResult test;
};

/// Test outcome for one unordered pair, oriented as (first, second).
struct PairReport {
    std::string first;
    std::string second;
    std::size_t n = 0;
    std::vector<PolicyOutcome> outcomes;
    bool significant = false;
    bool excluded = false;
    Warnings diagnostics;
};

struct NetworkEdge {
    std::string source;
    std::string target;
    double chi_diff = 0.0;  // chi(source, target) under the first policy
    double p_value = 1.0;   // largest p-value across the policies used
    std::string policy;
    std::string quadrant;
    bool flagged = false;   // chi^{Y->X} and chi^{X->Y} significantly on opposite sides of 1/2
};

struct DtdNetwork {
    std::vector<std::string> nodes;
    std::vector<NetworkEdge> edges;
    double alpha = 0.05;
    std::vector<PairReport> pairs;
};

namespace detail {

inline double orientation_sign(const DtdTestResult& t) {
    switch (t.quadrant.verdict) {
        case QuadrantVerdict::pqd: return 1.0;
        case QuadrantVerdict::nqd: return -1.0;
        default: return 1.0 - t.chi_yx - t.chi_xy >= 0.0 ? 1.0 : -1.0;
    }
}

inline bool non_reciprocal(const DtdTestResult& t, double level) {
    const bool opposite = (t.chi_yx - 0.5) * (t.chi_xy - 0.5) < 0.0;
    return opposite && t.yx_vs_half.p_value <= level && t.xy_vs_half.p_value <= level;
}

}  // namespace detail

/// Tests every unordered pair under each policy (u = v = the resolved
/// threshold) on complete cases. Intersection mode keeps a pair when every
/// policy rejects; single mode uses exactly one policy. An edge X -> Y is
/// drawn when chi(X,Y) is positive under PQD (negative under NQD); pairs
/// whose two TCTEs lie significantly on opposite sides of 1/2 are flagged.
inline DtdNetwork build_network(const std::vector<NamedSeries>& series, const std::vector<ThresholdPolicy>& policies,
                                const NetworkOptions& opt = {}) {
    require(series.size() >= 2, "build_network: need at least 2 series");
    require(opt.alpha > 0.0 && opt.alpha < 1.0, "build_network: alpha must lie in (0,1)");
    require(!policies.empty(), "build_network: need at least one threshold policy");
    require(opt.mode == NetworkMode::intersection || policies.size() == 1,
            "build_network: single mode takes exactly one policy");
    for (std::size_t i = 0; i < series.size(); ++i)
        for (std::size_t j = i + 1; j < series.size(); ++j)
            require(series[i].name != series[j].name, "build_network: duplicate series name '" + series[i].name + "'");

    DtdNetwork net;
    net.alpha = opt.alpha;
    for (const auto& s : series) net.nodes.push_back(s.name);

    std::vector<std::pair<std::size_t, std::size_t>> index;
    for (std::size_t i = 0; i < series.size(); ++i)
        for (std::size_t j = i + 1; j < series.size(); ++j) index.emplace_back(i, j);
    const double level = opt.bonferroni ? opt.alpha / static_cast<double>(index.size()) : opt.alpha;

    net.pairs.resize(index.size());
    parallel_for(index.size(), opt.threads, [&](std::size_t k) {
        const auto& x = series[index[k].first];
        const auto& y = series[index[k].second];
        auto& rep = net.pairs[k];
        rep.first = x.name;
        rep.second = y.name;
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < std::min(x.values.size(), y.values.size()); ++i)
            if (std::isfinite(x.values[i]) && std::isfinite(y.values[i])) {
                xs.push_back(x.values[i]);
                ys.push_back(y.values[i]);
            }
        rep.n = xs.size();
        try {
            RankedSample ranked = rank_transform(xs, ys, {x.name, y.name});
            for (const auto& w : ranked.warnings()) rep.diagnostics.push_back(w);
            if (opt.tail == Tail::upper) ranked = upper_tail_view(ranked);
            rep.significant = true;
            for (const auto& pol : policies) {
                PolicyOutcome o;
                o.policy = pol.name();
                o.v = resolve_threshold(pol, ranked.n());
                o.test = test_dtd(ranked, o.v, o.v, opt.grid);
                if (o.test.degenerate) {
                    rep.excluded = true;
                    rep.diagnostics.push_back("degenerate variance under policy " + o.policy);
                }
                rep.significant = rep.significant && o.test.p_value <= level;
                rep.outcomes.push_back(std::move(o));
            }
        } catch (const ValidationError& e) {
            rep.excluded = true;
            rep.significant = false;
            rep.diagnostics.push_back(e.what());
        }
        if (rep.excluded) rep.significant = false;
    });

    for (const auto& rep : net.pairs) {
        if (!rep.significant) continue;
        const auto& lead = rep.outcomes.front().test;
        const double oriented = detail::orientation_sign(lead) * lead.chi_diff;
        NetworkEdge e;
        const bool forward = oriented > 0.0;
        e.source = forward ? rep.first : rep.second;
        e.target = forward ? rep.second : rep.first;
        e.chi_diff = forward ? lead.chi_diff : -lead.chi_diff;
        e.quadrant = to_string(lead.quadrant.verdict);
        std::string pol;
        e.p_value = 0.0;
        for (const auto& o : rep.outcomes) {
            e.p_value = std::max(e.p_value, o.test.p_value);
            pol += (pol.empty() ? "" : "+") + o.policy;
            e.flagged = e.flagged || detail::non_reciprocal(o.test, level) ||
                        (detail::orientation_sign(o.test) * o.test.chi_diff > 0.0) != forward;
        }
        e.policy = pol;
        net.edges.push_back(std::move(e));
    }
    return net;
}

inline nlohmann::json to_json(const DtdNetwork& net) {
    nlohmann::json j;
    j["nodes"] = net.nodes;
    j["alpha"] = net.alpha;
    auto& edges = j["edges"] = nlohmann::json::array();
    for (const auto& e : net.edges)
        edges.push_back({{"source", e.source},
                         {"target", e.target},
                         {"chi_diff", e.chi_diff},
                         {"p_value", e.p_value},
                         {"policy", e.policy},
                         {"quadrant", e.quadrant},
                         {"flagged", e.flagged}});
    auto& pairs = j["pairs"] = nlohmann::json::array();
    for (const auto& p : net.pairs) {
        nlohmann::json pj{{"x", p.first}, {"y", p.second}, {"n", p.n}, {"significant", p.significant},
                          {"excluded", p.excluded}, {"diagnostics", p.diagnostics}};
        auto& tests = pj["tests"] = nlohmann::json::array();
        for (const auto& o : p.outcomes)
            tests.push_back({{"policy", o.policy},
                             {"v", o.v},
                             {"chi_yx", o.test.chi_yx},
                             {"chi_xy", o.test.chi_xy},
                             {"chi_diff", o.test.chi_diff},
                             {"sigma2_C", o.test.variance.sigma2_C},
                             {"sigma2_CP", o.test.variance.sigma2_CP},
                             {"cov_V", o.test.variance.cov_V},
                             {"z", o.test.z},
                             {"p_value", o.test.p_value},
                             {"quadrant", to_string(o.test.quadrant.verdict)}});
        pairs.push_back(std::move(pj));
    }
    return j;
}

inline void write_dot(std::ostream& os, const DtdNetwork& net) {
    os << "digraph dtd {\n";
    for (const auto& n : net.nodes) os << "  \"" << n << "\";\n";
    for (const auto& e : net.edges) {
        char label[64];
        std::snprintf(label, sizeof label, "%.3f (p=%.3g)", e.chi_diff, e.p_value);
        os << "  \"" << e.source << "\" -> \"" << e.target << "\" [label=\"" << label << '"';
        if (e.flagged) os << ", style=dashed, dir=none";
        os << "];\n";
    }
    os << "}\n";
}

}  // namespace tdep
