#pragma once

// The `tdep` command line: estimate, test, simulate, mc, risk, preprocess, network.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <CLI11.hpp>

#include "tdep/tdep.hpp"

namespace tdep::cli {

/// FNV-1a 64-bit hash, used as the configuration digest.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Canonical key=value record of a run's resolved settings.
class RunRecord {
public:
    explicit RunRecord(std::string command) : command_(std::move(command)) {}

    template <class T>
    RunRecord& add(const std::string& key, const T& value) {
        if constexpr (std::is_floating_point_v<T>) {
            entries_.emplace_back(key, format_number(value));
        } else {
            std::ostringstream ss;
            ss << std::boolalpha << value;
            entries_.emplace_back(key, ss.str());
        }
        return *this;
    }

    void seed(std::uint64_t s) { seed_ = std::to_string(s); }

    std::string digest() const {
        std::string canon = command_;
        for (const auto& [k, v] : entries_) canon += ";" + k + "=" + v;
        char buf[20];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canon)));
        return buf;
    }

    /// Comment block: version, command, seed, digest and the settings.
    void write(std::ostream& os) const {
        os << "# tdep " << version << '\n';
        os << "# command: " << command_ << '\n';
        os << "# seed: " << seed_ << '\n';
        os << "# config_digest: " << digest() << '\n';
        for (const auto& [k, v] : entries_) os << "# " << k << ": " << v << '\n';
    }

private:
    std::string command_;
    std::string seed_ = "none";
    std::vector<std::pair<std::string, std::string>> entries_;
};

/// stdout for "-" or an empty path, else a file opened for writing.
class Output {
public:
    explicit Output(const std::string& path, std::ostream& fallback) : os_(&fallback) {
        if (!path.empty() && path != "-") {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw IoError("cannot open '" + path + "' for writing");
            os_ = file_.get();
        }
    }
    std::ostream& stream() { return *os_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* os_;
};

struct GeneratorFlags {
    std::string family = "independence";
    double rho = 0.0;
    double theta = 1.0;
    double delta = 0.0;
    double alpha1 = 0.0;
    double alpha2 = 0.0;
    double nu = 3.0;

    void attach(CLI::App& app) {
        app.add_option("--family", family,
                       "Copula family: independence, gaussian, clayton, frank, fgm, comonotone, countermonotone, "
                       "khoudraji-<gaussian|clayton|frank|fgm>, skew-t")
            ->capture_default_str();
        app.add_option("--rho", rho, "Correlation (gaussian, skew-t)")->capture_default_str();
        app.add_option("--theta", theta, "Parameter of clayton, frank or fgm")->capture_default_str();
        app.add_option("--delta", delta, "Khoudraji asymmetry in [0,1]")->capture_default_str();
        app.add_option("--alpha1", alpha1, "Skew-t slant of the first margin")->capture_default_str();
        app.add_option("--alpha2", alpha2, "Skew-t slant of the second margin")->capture_default_str();
        app.add_option("--nu", nu, "Skew-t degrees of freedom")->capture_default_str();
    }

    Generator make() const { return make_generator(family, rho, theta, delta, alpha1, alpha2, nu); }

    void record(RunRecord& r) const {
        r.add("family", family).add("rho", rho).add("theta", theta).add("delta", delta);
        r.add("alpha1", alpha1).add("alpha2", alpha2).add("nu", nu);
    }
};

struct PairFlags {
    std::string input;
    std::string x;
    std::string y;
    std::string v = "sqrtlog";
    std::string tail = "lower";

    void attach(CLI::App& app) {
        app.add_option("--input", input, "CSV file with a header row")->required();
        app.add_option("--x", x, "Column holding X")->required();
        app.add_option("--y", y, "Column holding Y")->required();
        app.add_option("--v", v, "Threshold: a number in (0,1], sqrtlog or invsqrt")->capture_default_str();
        app.add_option("--tail", tail, "lower, or upper to study large values")
            ->check(CLI::IsMember({"lower", "upper"}))
            ->capture_default_str();
    }

    /// Ranked sample of the two columns on rows where both are present.
    RankedSample load(Warnings& warnings) const {
        const auto table = read_csv_file(input);
        const auto [xs, ys] = ocean::complete_cases(table.numeric_column(x), table.numeric_column(y));
        auto ranked = rank_transform(xs, ys, {x, y});
        warnings = ranked.warnings();
        const std::size_t dropped = table.rows.size() - xs.size();
        if (dropped > 0) warnings.push_back(std::to_string(dropped) + " rows with a missing value dropped");
        return tail == "upper" ? upper_tail_view(ranked) : ranked;
    }

    void record(RunRecord& r, std::size_t n, double v_resolved) const {
        r.add("input", input).add("x", x).add("y", y).add("threshold", v).add("tail", tail);
        r.add("n", n).add("v", v_resolved);
    }
};

inline bool quiet = false;

inline void print_warnings(const Warnings& w, std::ostream& err) {
    if (quiet) return;
    for (const auto& s : w) err << "warning: " << s << '\n';
}

inline std::vector<ThresholdPolicy> parse_policies(const std::string& text) {
    if (text == "both") return {ThresholdPolicy::sqrt_log(), ThresholdPolicy::inv_sqrt()};
    std::vector<ThresholdPolicy> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(ThresholdPolicy::parse(detail::trim(item)));
    require(!out.empty(), "no threshold policy given");
    return out;
}

/// Builds the parser, runs the chosen subcommand, and returns the exit code:
/// 0 on success, 2 for I/O, 3 for validation (including bad flags), 4 for
/// numerical failures.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Directional tail dependence: estimation, tests, simulation and networks", "tdep"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(version));
    std::size_t threads = default_threads();
    app.add_option("--threads", threads, "Worker threads (default: TDEP_THREADS or the hardware concurrency)")
        ->check(CLI::PositiveNumber);
    std::string log_level = "warning";
    app.add_option("--log-level", log_level, "warning, or error to suppress warnings")
        ->check(CLI::IsMember({"warning", "error"}))
        ->capture_default_str();

    // estimate
    auto* est = app.add_subcommand("estimate", "Point estimates of both TCTEs and their difference");
    PairFlags est_flags;
    est_flags.attach(*est);

    // test
    auto* tst = app.add_subcommand("test", "DTD significance test with the variance decomposition");
    PairFlags tst_flags;
    tst_flags.attach(*tst);
    std::string tst_u;
    std::size_t tst_grid = default_quadrature_grid;
    tst->add_option("--u", tst_u, "Threshold for the X->Y estimate (default: same as --v)");
    tst->add_option("--grid", tst_grid, "Quadrature cells per axis")->capture_default_str()->check(CLI::Range(8, 100000));

    // simulate
    auto* sim = app.add_subcommand("simulate", "Draw a sample from a copula on (0,1)^2");
    GeneratorFlags sim_gen;
    sim_gen.attach(*sim);
    std::size_t sim_n = 1000;
    std::uint64_t sim_seed = 1;
    std::string sim_out = "-";
    sim->add_option("--n", sim_n, "Sample size")->capture_default_str()->check(CLI::PositiveNumber);
    sim->add_option("--seed", sim_seed, "Random seed")->capture_default_str();
    sim->add_option("--output", sim_out, "Output CSV path, - for stdout")->capture_default_str();

    // mc
    auto* mc = app.add_subcommand("mc", "Monte Carlo experiment from a spec file");
    std::string mc_spec;
    std::string mc_out;
    mc->add_option("--spec", mc_spec, "Experiment spec file (key = value lines)")->required();
    mc->add_option("--output", mc_out, "Output CSV path, overriding the spec");

    // risk
    auto* risk = app.add_subcommand("risk", "Asymptotic quadratic risk curve of the Y->X estimate");
    GeneratorFlags risk_gen;
    risk_gen.attach(*risk);
    std::size_t risk_n = 100;
    double risk_step = 1e-3;
    double risk_max = 1.0;
    std::size_t risk_grid = default_risk_grid;
    std::string risk_out = "-";
    risk->add_option("--n", risk_n, "Sample size")->capture_default_str()->check(CLI::Range(2, 1000000000));
    risk->add_option("--step", risk_step, "Threshold grid step")->capture_default_str();
    risk->add_option("--vmax", risk_max, "Largest threshold on the grid")->capture_default_str();
    risk->add_option("--grid", risk_grid, "Quadrature cells per axis")->capture_default_str()->check(CLI::Range(8, 100000));
    risk->add_option("--output", risk_out, "Output CSV path, - for stdout")->capture_default_str();

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "NDBC files to a weekly deseasonalized CSV");
    std::vector<std::string> pre_inputs;
    std::string pre_out;
    std::string pre_meta;
    std::string pre_stat = "first";
    pre->add_option("--input", pre_inputs, "NDBC standard meteorological files")->required();
    pre->add_option("--output", pre_out, "Weekly CSV path")->required();
    pre->add_option("--metadata", pre_meta, "Metadata JSON path (default: <output>.meta.json)");
    pre->add_option("--statistic", pre_stat, "Weekly value: first, max or mean")
        ->check(CLI::IsMember({"first", "max", "mean"}))
        ->capture_default_str();

    // network
    auto* net = app.add_subcommand("network", "Directed network of significant DTD links");
    std::string net_in;
    std::vector<std::string> net_vars;
    double net_alpha = 0.05;
    std::string net_policies = "both";
    std::string net_mode = "auto";
    std::string net_tail = "upper";
    bool net_bonf = false;
    std::size_t net_grid = default_quadrature_grid;
    std::string net_out = "-";
    std::string net_dot;
    net->add_option("--input", net_in, "Weekly CSV (week_index, year, variables...)")->required();
    net->add_option("--variables", net_vars, "Variables to include (default: all)");
    net->add_option("--alpha", net_alpha, "Significance level")->capture_default_str();
    net->add_option("--policies", net_policies, "both, or a comma list of sqrtlog, invsqrt, numbers")
        ->capture_default_str();
    net->add_option("--mode", net_mode, "auto, intersection or single")
        ->check(CLI::IsMember({"auto", "intersection", "single"}))
        ->capture_default_str();
    net->add_option("--tail", net_tail, "upper (large values) or lower")
        ->check(CLI::IsMember({"lower", "upper"}))
        ->capture_default_str();
    net->add_flag("--bonferroni", net_bonf, "Divide alpha by the number of pairs");
    net->add_option("--grid", net_grid, "Quadrature cells per axis")->capture_default_str()->check(CLI::Range(8, 100000));
    net->add_option("--output", net_out, "JSON output path, - for stdout")->capture_default_str();
    net->add_option("--dot", net_dot, "Graphviz DOT output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(ErrorKind::validation);
    }

    quiet = log_level == "error";
    try {
        if (*est) {
            Warnings w;
            const auto ranked = est_flags.load(w);
            print_warnings(w, err);
            const double v = resolve_threshold(ThresholdPolicy::parse(est_flags.v), ranked.n());
            RunRecord rec("estimate");
            est_flags.record(rec, ranked.n(), v);
            rec.write(out);
            const auto yx = tcte_hat(ranked, v, Direction::YtoX);
            const auto xy = tcte_hat(ranked, v, Direction::XtoY);
            out << "x,y,n,tail,v,chi_yx,chi_xy,chi_diff\n";
            out << est_flags.x << ',' << est_flags.y << ',' << ranked.n() << ',' << est_flags.tail << ','
                << format_number(v) << ',' << format_number(yx.value) << ',' << format_number(xy.value) << ','
                << format_number(yx.value - xy.value) << '\n';
        } else if (*tst) {
            Warnings w;
            const auto ranked = tst_flags.load(w);
            print_warnings(w, err);
            const double v = resolve_threshold(ThresholdPolicy::parse(tst_flags.v), ranked.n());
            const double u = tst_u.empty() ? v : resolve_threshold(ThresholdPolicy::parse(tst_u), ranked.n());
            RunRecord rec("test");
            tst_flags.record(rec, ranked.n(), v);
            rec.add("u", u).add("grid", tst_grid);
            const auto r = test_dtd(ranked, u, v, tst_grid);
            print_warnings(r.warnings, err);
            rec.write(out);
            out << "x,y,n,tail,u,v,chi_yx,chi_xy,chi_diff,sigma2_C,sigma2_CP,cov_V,total_variance,z,p_value,"
                   "quadrant,z_yx_half,p_yx_half,z_xy_half,p_xy_half,degenerate\n";
            out << tst_flags.x << ',' << tst_flags.y << ',' << r.n << ',' << tst_flags.tail << ',' << format_number(u)
                << ',' << format_number(v) << ',' << format_number(r.chi_yx) << ',' << format_number(r.chi_xy) << ','
                << format_number(r.chi_diff) << ',' << format_number(r.variance.sigma2_C) << ','
                << format_number(r.variance.sigma2_CP) << ',' << format_number(r.variance.cov_V) << ','
                << format_number(r.variance.total) << ',' << format_number(r.z) << ',' << format_number(r.p_value)
                << ',' << to_string(r.quadrant.verdict) << ',' << format_number(r.yx_vs_half.z) << ','
                << format_number(r.yx_vs_half.p_value) << ',' << format_number(r.xy_vs_half.z) << ','
                << format_number(r.xy_vs_half.p_value) << ',' << (r.degenerate ? "true" : "false") << '\n';
        } else if (*sim) {
            const auto gen = sim_gen.make();
            RunRecord rec("simulate");
            rec.seed(sim_seed);
            sim_gen.record(rec);
            rec.add("generator", generator_name(gen)).add("n", sim_n);
            const auto s = sample(SimulationConfig{gen, sim_n, sim_seed});
            Output o(sim_out, out);
            rec.write(o.stream());
            o.stream() << "u,v\n";
            char buf[64];
            for (std::size_t i = 0; i < s.size(); ++i) {
                std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", s.u[i], s.v[i]);
                o.stream() << buf;
            }
        } else if (*mc) {
            auto spec = parse_spec_file(mc_spec);
            if (!mc_out.empty()) spec.output = mc_out;
            if (app.count("--threads") || spec.threads == 0) spec.threads = threads;
            RunRecord rec("mc");
            rec.seed(spec.seed);
            {
                std::ifstream in(mc_spec);
                std::stringstream ss;
                ss << in.rdbuf();
                rec.add("spec_file", mc_spec).add("spec_digest", fnv1a(ss.str()));
            }
            const auto result = run(spec);
            Output o(spec.output, out);
            rec.write(o.stream());
            write_csv(o.stream(), result);
        } else if (*risk) {
            const auto gen = risk_gen.make();
            const auto* model = std::get_if<CopulaModel>(&gen);
            require(model != nullptr, "risk: needs an analytic copula family");
            const auto grid = uniform_grid(risk_step, risk_max);
            const auto curve = risk_curve(*model, risk_n, grid, risk_grid);
            RunRecord rec("risk");
            risk_gen.record(rec);
            rec.add("model", model->name()).add("n", risk_n).add("step", risk_step).add("vmax", risk_max);
            rec.add("grid", risk_grid);
            Output o(risk_out, out);
            rec.write(o.stream());
            o.stream() << "# argmin_v: " << format_number(curve.best().v) << '\n';
            write_risk_csv(o.stream(), curve);
        } else if (*pre) {
            std::vector<std::vector<ocean::BuoyRecord>> parts;
            RunRecord rec("preprocess");
            std::size_t rows = 0, skipped = 0;
            for (const auto& path : pre_inputs) {
                ocean::ParseReport report;
                parts.push_back(ocean::parse_ndbc_file(path, &report));
                rows += report.rows;
                skipped += report.skipped;
                for (const auto& w : report.warnings)
                    if (!quiet) err << "warning: " << path << ": " << w << '\n';
                rec.add("input", path);
            }
            const auto stat = ocean::parse_weekly_statistic(pre_stat);
            rec.add("statistic", pre_stat);
            const auto records = ocean::merge(std::move(parts));
            const auto raw = ocean::subsample_weekly(records, stat);
            std::vector<ocean::WeeklySeries> series;
            for (const auto& r : raw) {
                if (r.obs.empty()) {
                    if (!quiet) err << "warning: " << r.name << ": no valid observations, omitted\n";
                    continue;
                }
                series.push_back(ocean::deseasonalize(r));
                print_warnings(series.back().warnings, err);
            }
            const auto table = ocean::align(series);
            {
                Output o(pre_out, out);
                rec.write(o.stream());
                ocean::write_weekly_csv(o.stream(), table);
            }
            const std::string meta_path = pre_meta.empty() ? pre_out + ".meta.json" : pre_meta;
            {
                Output o(meta_path, out);
                auto j = ocean::metadata_json(series, stat);
                j["config_digest"] = rec.digest();
                o.stream() << j.dump(2) << '\n';
            }
            rec.write(out);
            out << "records: " << records.size() << " (rows read " << rows << ", skipped " << skipped << ")\n";
            out << "weekly rows: " << table.weeks.size() << '\n';
            for (std::size_t k = 0; k < table.names.size(); ++k)
                out << "  " << table.names[k] << ": " << series[k].values.size() << " weekly values\n";
        } else if (*net) {
            const auto csv = read_csv_file(net_in);
            const auto table = ocean::read_weekly_csv(csv);
            std::vector<NamedSeries> series;
            const auto names = net_vars.empty() ? table.names : net_vars;
            for (const auto& name : names) series.push_back({name, table.column(name)});
            const auto policies = parse_policies(net_policies);
            NetworkOptions opt;
            opt.alpha = net_alpha;
            opt.tail = net_tail == "upper" ? Tail::upper : Tail::lower;
            opt.mode = net_mode == "single" || (net_mode == "auto" && policies.size() == 1) ? NetworkMode::single
                                                                                          : NetworkMode::intersection;
            opt.bonferroni = net_bonf;
            opt.grid = net_grid;
            opt.threads = threads;
            const auto network = build_network(series, policies, opt);
            RunRecord rec("network");
            rec.add("input", net_in).add("alpha", net_alpha).add("policies", net_policies);
            rec.add("mode", opt.mode == NetworkMode::single ? "single" : "intersection").add("tail", net_tail);
            rec.add("bonferroni", net_bonf).add("grid", net_grid);
            for (const auto& p : network.pairs) print_warnings(p.diagnostics, err);
            auto j = to_json(network);
            j["run"] = {{"version", version}, {"config_digest", rec.digest()}};
            {
                Output o(net_out, out);
                o.stream() << j.dump(2) << '\n';
            }
            if (!net_dot.empty()) {
                Output o(net_dot, out);
                write_dot(o.stream(), network);
            }
            if (!net_out.empty() && net_out != "-") {
                rec.write(out);
                for (const auto& e : network.edges)
                    out << e.source << " -> " << e.target << "  chi_diff=" << format_number(e.chi_diff)
                        << "  p=" << format_number(e.p_value) << (e.flagged ? "  (flagged)" : "") << '\n';
            }
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::bad_alloc&) {
        err << "error: out of memory\n";
        return static_cast<int>(ErrorKind::numeric);
    }
    return 0;
}

}  // namespace tdep::cli
