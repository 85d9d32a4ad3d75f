#pragma once

// Monte Carlo experiments: bias, RMSE and power of the estimators over a
// grid of generators, sample sizes and threshold policies.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tdep/analytic_models.hpp"
#include "tdep/asymptotics.hpp"
#include "tdep/concurrency.hpp"
#include "tdep/csv.hpp"
#include "tdep/error.hpp"
#include "tdep/rng.hpp"
#include "tdep/samplers.hpp"
#include "tdep/tcte.hpp"

namespace tdep {

enum class TruthSource { automatic, analytic, monte_carlo };

struct ExperimentSpec {
    std::vector<std::string> families;
    std::vector<double> rho{0.0};
    std::vector<double> theta{1.0};
    std::vector<double> delta{0.0};
    std::vector<double> alpha1{0.0};
    std::optional<std::vector<double>> alpha2;  // unset: alpha2 = -alpha1
    std::vector<double> nu{3.0};
    std::vector<std::size_t> n_values{1000};
    std::size_t replications = 100;
    std::vector<ThresholdPolicy> policies{ThresholdPolicy::sqrt_log()};
    bool bias = true;
    bool rmse = true;
    bool power = false;
    double level = 0.05;
    std::uint64_t seed = 1;
    std::string output = "-";
    std::size_t grid = default_quadrature_grid;
    TruthSource truth = TruthSource::automatic;
    std::size_t truth_samples = 10'000'000;
    std::size_t threads = 0;  // 0: default_threads()
};

/// One generator configuration of the experiment grid.
struct Cell {
    std::string family;
    Generator generator = CopulaModel::independence();
    double rho = std::numeric_limits<double>::quiet_NaN();
    double theta = std::numeric_limits<double>::quiet_NaN();
    double delta = std::numeric_limits<double>::quiet_NaN();
    double alpha1 = std::numeric_limits<double>::quiet_NaN();
    double alpha2 = std::numeric_limits<double>::quiet_NaN();
    double nu = std::numeric_limits<double>::quiet_NaN();
};

struct Truth {
    double value = std::numeric_limits<double>::quiet_NaN();
    double std_err = 0.0;
    bool monte_carlo = false;
};

struct ResultRow {
    Cell cell;
    std::size_t n = 0;
    std::string policy;
    double v = 0.0;
    std::string direction;  // YtoX, XtoY or diff
    std::size_t replications = 0;
    Truth truth;
    double mean = 0.0;
    double bias = std::numeric_limits<double>::quiet_NaN();
    double rmse = std::numeric_limits<double>::quiet_NaN();
    double power = std::numeric_limits<double>::quiet_NaN();
    std::string status = "ok";
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double parse_real(const std::string& key, const std::string& s) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    require(used == s.size() && used > 0, "spec key '" + key + "': not a number: '" + s + "'");
    return x;
}

inline std::uint64_t parse_count(const std::string& key, const std::string& s) {
    require(!s.empty() && s.find_first_not_of("0123456789") == std::string::npos,
            "spec key '" + key + "': not a non-negative integer: '" + s + "'");
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw ValidationError("spec key '" + key + "': integer out of range: '" + s + "'");
    }
}

inline std::vector<double> parse_reals(const std::string& key, const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) out.push_back(parse_real(key, item));
    require(!out.empty(), "spec key '" + key + "': empty list");
    return out;
}

inline const std::vector<std::string>& known_families() {
    static const std::vector<std::string> f = {
        "independence", "gaussian", "clayton", "frank", "fgm", "comonotone", "countermonotone",
        "khoudraji-gaussian", "khoudraji-clayton", "khoudraji-frank", "khoudraji-fgm", "skew-t"};
    return f;
}

}  // namespace detail

/// Builds a generator from a family name and parameter values. Families:
/// independence, gaussian, clayton, frank, fgm, comonotone,
/// countermonotone, khoudraji-<gaussian|clayton|frank|fgm>, skew-t.
inline Generator make_generator(const std::string& family, double rho, double theta, double delta, double alpha1,
                                double alpha2, double nu) {
    auto base_of = [&](const std::string& b) -> CopulaModel {
        if (b == "independence") return CopulaModel::independence();
        if (b == "gaussian") return CopulaModel::gaussian(rho);
        if (b == "clayton") return CopulaModel::clayton(theta);
        if (b == "frank") return CopulaModel::frank(theta);
        if (b == "fgm") return CopulaModel::fgm(theta);
        if (b == "comonotone") return CopulaModel::comonotone();
        if (b == "countermonotone") return CopulaModel::countermonotone();
        throw ValidationError("unknown copula family '" + b + "'");
    };
    if (family == "skew-t" || family == "skew_t") {
        SkewTParams p{rho, alpha1, alpha2, nu};
        validate(p);
        return p;
    }
    const std::string prefix = "khoudraji-";
    if (family.rfind(prefix, 0) == 0) return CopulaModel::khoudraji(base_of(family.substr(prefix.size())), delta);
    return base_of(family);
}

/// Plain-text spec: one `key = value` per line, lists comma-separated,
/// '#' starts a comment. Keys: family, rho, theta, delta, alpha (sets
/// alpha1 = -alpha2), alpha1, alpha2, nu, n, replications, policies,
/// metrics (bias, rmse, power), level, seed, output, grid, truth
/// (auto, analytic, montecarlo), truth_samples, threads.
inline ExperimentSpec parse_spec(std::istream& in) {
    ExperimentSpec spec;
    std::string line;
    std::size_t lineno = 0;
    bool saw_family = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        require(eq != std::string::npos, "spec line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key == "family") {
            spec.families = detail::split_list(value);
            for (const auto& f : spec.families)
                require(std::find(detail::known_families().begin(), detail::known_families().end(), f) !=
                            detail::known_families().end(),
                        "spec: unknown family '" + f + "'");
            saw_family = true;
        } else if (key == "rho") {
            spec.rho = detail::parse_reals(key, value);
        } else if (key == "theta") {
            spec.theta = detail::parse_reals(key, value);
        } else if (key == "delta") {
            spec.delta = detail::parse_reals(key, value);
        } else if (key == "alpha" || key == "alpha1") {
            spec.alpha1 = detail::parse_reals(key, value);
        } else if (key == "alpha2") {
            spec.alpha2 = detail::parse_reals(key, value);
        } else if (key == "nu") {
            spec.nu = detail::parse_reals(key, value);
        } else if (key == "n") {
            spec.n_values.clear();
            for (const auto& item : detail::split_list(value)) {
                const auto n = detail::parse_count(key, item);
                require(n >= 2, "spec: n must be >= 2");
                spec.n_values.push_back(n);
            }
            require(!spec.n_values.empty(), "spec: empty n list");
        } else if (key == "replications") {
            spec.replications = detail::parse_count(key, value);
        } else if (key == "policies") {
            spec.policies.clear();
            for (const auto& item : detail::split_list(value)) spec.policies.push_back(ThresholdPolicy::parse(item));
            require(!spec.policies.empty(), "spec: empty policies list");
        } else if (key == "metrics") {
            spec.bias = spec.rmse = spec.power = false;
            for (const auto& m : detail::split_list(value)) {
                if (m == "bias") spec.bias = true;
                else if (m == "rmse") spec.rmse = true;
                else if (m == "power") spec.power = true;
                else throw ValidationError("spec: unknown metric '" + m + "'");
            }
        } else if (key == "level") {
            spec.level = detail::parse_real(key, value);
        } else if (key == "seed") {
            spec.seed = detail::parse_count(key, value);
        } else if (key == "output") {
            spec.output = value;
        } else if (key == "grid") {
            spec.grid = detail::parse_count(key, value);
        } else if (key == "truth") {
            if (value == "auto") spec.truth = TruthSource::automatic;
            else if (value == "analytic") spec.truth = TruthSource::analytic;
            else if (value == "montecarlo") spec.truth = TruthSource::monte_carlo;
            else throw ValidationError("spec: truth must be auto, analytic or montecarlo");
        } else if (key == "truth_samples") {
            spec.truth_samples = detail::parse_count(key, value);
        } else if (key == "threads") {
            spec.threads = detail::parse_count(key, value);
        } else {
            throw ValidationError("spec line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    require(saw_family && !spec.families.empty(), "spec: 'family' is required");
    require(spec.replications >= 1, "spec: replications must be >= 1");
    require(spec.level > 0.0 && spec.level < 1.0, "spec: level must lie in (0,1)");
    require(spec.grid >= 8, "spec: grid must be >= 8");
    require(spec.truth_samples >= 1, "spec: truth_samples must be >= 1");
    return spec;
}

inline ExperimentSpec parse_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open spec file '" + path + "'");
    return parse_spec(in);
}

/// Expands the parameter lists relevant to each family into cells.
inline std::vector<Cell> expand_cells(const ExperimentSpec& spec) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const std::vector<double> none{nan};
    std::vector<Cell> cells;
    for (const auto& fam : spec.families) {
        const bool khoudraji = fam.rfind("khoudraji-", 0) == 0;
        const std::string base = khoudraji ? fam.substr(10) : fam;
        const bool skew = fam == "skew-t";
        const bool uses_rho = base == "gaussian" || skew;
        const bool uses_theta = base == "clayton" || base == "frank" || base == "fgm";
        const auto& rhos = uses_rho ? spec.rho : none;
        const auto& thetas = uses_theta ? spec.theta : none;
        const auto& deltas = khoudraji ? spec.delta : none;
        const auto& a1s = skew ? spec.alpha1 : none;
        const auto& nus = skew ? spec.nu : none;
        for (double rho : rhos)
            for (double theta : thetas)
                for (double delta : deltas)
                    for (double nu : nus)
                        for (std::size_t ia = 0; ia < a1s.size(); ++ia) {
                            std::vector<double> a2s;
                            if (!skew) a2s = none;
                            else if (spec.alpha2) a2s = *spec.alpha2;
                            else a2s = {-a1s[ia]};
                            for (double a2 : a2s) {
                                Cell c;
                                c.family = fam;
                                c.rho = rho;
                                c.theta = theta;
                                c.delta = delta;
                                c.alpha1 = a1s[ia];
                                c.alpha2 = a2;
                                c.nu = nu;
                                c.generator = make_generator(fam, rho, theta, delta, a1s[ia], a2, nu);
                                cells.push_back(std::move(c));
                            }
                        }
    }
    return cells;
}

/// Monte Carlo estimate of chi(v) on the copula scale: the mean of U over
/// draws with V <= v (YtoX), or of V over U <= v (XtoY).
inline Truth monte_carlo_truth(const Generator& g, double v, Direction direction, std::size_t samples,
                               std::uint64_t seed) {
    Rng rng = Rng::stream(seed, {0x7275746875ULL});
    const std::size_t chunk = 1 << 16;
    double sum = 0.0, sum2 = 0.0;
    std::size_t hits = 0;
    for (std::size_t done = 0; done < samples; done += chunk) {
        const auto s = sample(g, std::min(chunk, samples - done), rng);
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double cond = direction == Direction::YtoX ? s.v[i] : s.u[i];
            const double target = direction == Direction::YtoX ? s.u[i] : s.v[i];
            if (cond <= v) {
                sum += target;
                sum2 += target * target;
                ++hits;
            }
        }
    }
    if (hits < 2) throw NumericError("Monte Carlo truth: too few draws in the conditioning set");
    Truth t;
    const double h = static_cast<double>(hits);
    t.value = sum / h;
    t.std_err = std::sqrt(std::max(0.0, sum2 / h - t.value * t.value) / h);
    t.monte_carlo = true;
    return t;
}

/// chi(v) of a cell's generator: adaptive quadrature for analytic models,
/// Monte Carlo (flagged) for skew-t or on request.
inline Truth truth_value(const Cell& cell, double v, Direction direction, TruthSource source = TruthSource::automatic,
                         std::size_t samples = 10'000'000, std::uint64_t seed = 1) {
    const auto* model = std::get_if<CopulaModel>(&cell.generator);
    if (source == TruthSource::analytic && !model)
        throw ValidationError("analytic truth unavailable for " + generator_name(cell.generator));
    if (model && source != TruthSource::monte_carlo) return Truth{theoretical_tcte(*model, v, direction), 0.0, false};
    return monte_carlo_truth(cell.generator, v, direction, samples, seed);
}

namespace detail {

struct Replicate {
    // per policy: chi_yx, chi_xy, reject(diff), reject(yx vs 1/2), reject(xy vs 1/2)
    std::vector<double> yx, xy;
    std::vector<char> rej_diff, rej_yx, rej_xy;
    std::string error;
};

}  // namespace detail

struct ExperimentResult {
    std::vector<ResultRow> rows;
};

/// Runs every (cell, n, replication) job, then aggregates per (cell, n,
/// policy, direction). Replication r of cell c at size n draws from stream
/// (seed, c, n, r), so output does not depend on the thread count.
inline ExperimentResult run(const ExperimentSpec& spec) {
    const auto cells = expand_cells(spec);
    const std::size_t np = spec.policies.size();
    const std::size_t nn = spec.n_values.size();
    const std::size_t reps = spec.replications;
    const std::size_t jobs = cells.size() * nn * reps;
    std::vector<detail::Replicate> out(jobs);

    parallel_for(jobs, spec.threads ? spec.threads : default_threads(), [&](std::size_t job) {
        const std::size_t r = job % reps;
        const std::size_t in = (job / reps) % nn;
        const std::size_t ic = job / (reps * nn);
        const std::size_t n = spec.n_values[in];
        auto& res = out[job];
        try {
            Rng rng = Rng::stream(spec.seed, {ic, n, r});
            const auto s = sample(cells[ic].generator, n, rng);
            const auto ranked = rank_transform(s.u, s.v);
            for (const auto& pol : spec.policies) {
                const double v = resolve_threshold(pol, n);
                if (spec.power) {
                    const auto t = test_dtd(ranked, v, v, spec.grid);
                    res.yx.push_back(t.chi_yx);
                    res.xy.push_back(t.chi_xy);
                    res.rej_diff.push_back(t.p_value <= spec.level);
                    res.rej_yx.push_back(t.yx_vs_half.p_value <= spec.level);
                    res.rej_xy.push_back(t.xy_vs_half.p_value <= spec.level);
                } else {
                    res.yx.push_back(tcte_hat(ranked, v, Direction::YtoX).value);
                    res.xy.push_back(tcte_hat(ranked, v, Direction::XtoY).value);
                }
            }
        } catch (const std::exception& e) {
            res.error = e.what();
        }
    });

    ExperimentResult result;
    const bool need_truth = spec.bias || spec.rmse;
    for (std::size_t ic = 0; ic < cells.size(); ++ic) {
        for (std::size_t in = 0; in < nn; ++in) {
            const std::size_t n = spec.n_values[in];
            std::string failure;
            for (std::size_t r = 0; r < reps && failure.empty(); ++r)
                if (!out[(ic * nn + in) * reps + r].error.empty())
                    failure = "failed: replication " + std::to_string(r) + ": " + out[(ic * nn + in) * reps + r].error;
            for (std::size_t ip = 0; ip < np; ++ip) {
                const double v = resolve_threshold(spec.policies[ip], n);
                Truth tyx, txy, tdiff;
                if (need_truth && failure.empty()) {
                    tyx = truth_value(cells[ic], v, Direction::YtoX, spec.truth, spec.truth_samples, spec.seed);
                    txy = truth_value(cells[ic], v, Direction::XtoY, spec.truth, spec.truth_samples, spec.seed);
                    tdiff.value = tyx.value - txy.value;
                    tdiff.std_err = std::hypot(tyx.std_err, txy.std_err);
                    tdiff.monte_carlo = tyx.monte_carlo || txy.monte_carlo;
                }
                const char* names[3] = {"YtoX", "XtoY", "diff"};
                const Truth* truths[3] = {&tyx, &txy, &tdiff};
                for (int d = 0; d < 3; ++d) {
                    ResultRow row;
                    row.cell = cells[ic];
                    row.n = n;
                    row.policy = spec.policies[ip].name();
                    row.v = v;
                    row.direction = names[d];
                    row.replications = reps;
                    row.truth = *truths[d];
                    if (!failure.empty()) {
                        row.status = failure;
                        row.mean = std::numeric_limits<double>::quiet_NaN();
                        result.rows.push_back(std::move(row));
                        continue;
                    }
                    double sum = 0.0, sq = 0.0, rej = 0.0;
                    for (std::size_t r = 0; r < reps; ++r) {
                        const auto& rep = out[(ic * nn + in) * reps + r];
                        const double est = d == 0 ? rep.yx[ip] : d == 1 ? rep.xy[ip] : rep.yx[ip] - rep.xy[ip];
                        sum += est;
                        if (need_truth) sq += (est - row.truth.value) * (est - row.truth.value);
                        if (spec.power)
                            rej += d == 0 ? rep.rej_yx[ip] : d == 1 ? rep.rej_xy[ip] : rep.rej_diff[ip];
                    }
                    const double nr = static_cast<double>(reps);
                    row.mean = sum / nr;
                    if (spec.bias) row.bias = row.mean - row.truth.value;
                    if (spec.rmse) row.rmse = std::sqrt(sq / nr);
                    if (spec.power) row.power = rej / nr;
                    result.rows.push_back(std::move(row));
                }
            }
        }
    }
    return result;
}

inline void write_csv(std::ostream& os, const ExperimentResult& r) {
    os << "family,rho,theta,delta,alpha1,alpha2,nu,n,policy,v,direction,replications,truth,truth_se,truth_source,"
          "mean,bias,rmse,power,status\n";
    for (const auto& row : r.rows) {
        const auto& c = row.cell;
        os << c.family << ',' << format_number(c.rho) << ',' << format_number(c.theta) << ','
           << format_number(c.delta) << ',' << format_number(c.alpha1) << ',' << format_number(c.alpha2) << ','
           << format_number(c.nu) << ',' << row.n << ',' << row.policy << ',' << format_number(row.v) << ','
           << row.direction << ',' << row.replications << ',' << format_number(row.truth.value) << ','
           << format_number(row.truth.std_err) << ','
           << (std::isnan(row.truth.value) ? "" : row.truth.monte_carlo ? "montecarlo" : "analytic") << ','
           << format_number(row.mean) << ',' << format_number(row.bias) << ',' << format_number(row.rmse) << ','
           << format_number(row.power) << ',' << (row.status == "ok" ? row.status : '"' + row.status + '"') << '\n';
    }
}

}  // namespace tdep
