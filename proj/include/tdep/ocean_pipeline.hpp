#pragma once

// NDBC standard meteorological files to weekly, deseasonalized series.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdep/csv.hpp"
#include "tdep/error.hpp"

namespace tdep::ocean {

enum class Channel { WVHT, APD, DPD, WSPD, PRES };

inline constexpr std::size_t channel_count = 5;
inline constexpr std::array<const char*, channel_count> channel_names = {"WVHT", "APD", "DPD", "WSPD", "PRES"};

inline const char* to_string(Channel c) { return channel_names[static_cast<std::size_t>(c)]; }

inline std::optional<Channel> channel_from_name(const std::string& s) {
    if (s == "WVHT") return Channel::WVHT;
    if (s == "APD") return Channel::APD;
    if (s == "DPD") return Channel::DPD;
    if (s == "WSPD" || s == "SPD") return Channel::WSPD;
    if (s == "PRES" || s == "BAR") return Channel::PRES;
    return std::nullopt;
}

using Timestamp = std::chrono::sys_seconds;

struct BuoyRecord {
    Timestamp time{};
    std::array<double, channel_count> values{};  // NaN where missing

    double operator[](Channel c) const { return values[static_cast<std::size_t>(c)]; }
    bool missing(Channel c) const { return std::isnan((*this)[c]); }
};

struct ParseReport {
    std::size_t rows = 0;
    std::size_t skipped = 0;
    Warnings warnings;
};

namespace detail {

// Missing-value codes: 99 for heights, periods and speeds, 9999 for pressure.
inline double sentinel(Channel c) { return c == Channel::PRES ? 9999.0 : 99.0; }

inline std::vector<std::string> tokens(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string t;
    while (ss >> t) out.push_back(t);
    return out;
}

inline bool parse_number(const std::string& s, double& x) {
    if (s == "MM") {
        x = std::numeric_limits<double>::quiet_NaN();
        return true;
    }
    std::size_t used = 0;
    try {
        x = std::stod(s, &used);
    } catch (const std::exception&) {
        return false;
    }
    return used == s.size();
}

}  // namespace detail

/// Expands a two-digit NDBC year: 70-99 to 19xx, 00-69 to 20xx.
inline int expand_year(int yy) {
    if (yy >= 100) return yy;
    return yy >= 70 ? 1900 + yy : 2000 + yy;
}

/// Reads one NDBC standard meteorological file. Columns are located by the
/// header names ('#YY', 'YYYY' or 'YY', then MM DD hh [mm], channel names with
/// the older BAR and SPD aliases accepted). A second '#' line of units is skipped.
inline std::vector<BuoyRecord> parse_ndbc(std::istream& in, ParseReport* report = nullptr) {
    ParseReport local;
    ParseReport& rep = report ? *report : local;
    std::string line;
    std::vector<std::string> header;
    while (header.empty() && std::getline(in, line)) {
        auto t = detail::tokens(line);
        if (t.empty()) continue;
        if (t[0].front() == '#') t[0].erase(0, 1);
        if (t[0].empty()) t.erase(t.begin());
        header = std::move(t);
    }
    if (header.empty()) throw IoError("NDBC input is empty");
    const std::string& ycol = header[0];
    if (ycol != "YY" && ycol != "YYYY") throw IoError("NDBC header must start with YY or YYYY, got '" + ycol + "'");
    auto find = [&](const char* name) -> std::optional<std::size_t> {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return k;
        return std::nullopt;
    };
    const auto mo = find("MM"), dy = find("DD"), hr = find("hh");
    if (!mo || !dy || !hr) throw IoError("NDBC header lacks MM, DD or hh");
    const auto mi = find("mm");
    std::array<std::optional<std::size_t>, channel_count> col;
    for (std::size_t k = 0; k < header.size(); ++k)
        if (auto c = channel_from_name(header[k])) col[static_cast<std::size_t>(*c)] = k;

    std::vector<BuoyRecord> out;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = detail::tokens(line);
        if (t.empty() || t[0].front() == '#') continue;
        ++rep.rows;
        if (t.size() != header.size()) {
            ++rep.skipped;
            continue;
        }
        double f[5] = {};
        bool ok = detail::parse_number(t[0], f[0]) && detail::parse_number(t[*mo], f[1]) &&
                  detail::parse_number(t[*dy], f[2]) && detail::parse_number(t[*hr], f[3]);
        if (mi) ok = ok && detail::parse_number(t[*mi], f[4]);
        for (int k = 0; k < (mi ? 5 : 4) && ok; ++k) ok = std::isfinite(f[k]) && f[k] == std::floor(f[k]);
        if (!ok) {
            ++rep.skipped;
            continue;
        }
        using namespace std::chrono;
        const year_month_day ymd{year{expand_year(static_cast<int>(f[0]))}, month{static_cast<unsigned>(f[1])},
                                 day{static_cast<unsigned>(f[2])}};
        if (!ymd.ok() || f[3] < 0 || f[3] > 23 || f[4] < 0 || f[4] > 59) {
            ++rep.skipped;
            continue;
        }
        BuoyRecord r;
        r.time = sys_days{ymd} + hours{static_cast<int>(f[3])} + minutes{static_cast<int>(f[4])};
        bool bad = false;
        for (std::size_t c = 0; c < channel_count; ++c) {
            double x = std::numeric_limits<double>::quiet_NaN();
            if (col[c] && !detail::parse_number(t[*col[c]], x)) bad = true;
            if (x >= detail::sentinel(static_cast<Channel>(c))) x = std::numeric_limits<double>::quiet_NaN();
            r.values[c] = x;
        }
        if (bad) {
            ++rep.skipped;
            continue;
        }
        out.push_back(r);
    }
    if (rep.skipped > 0) rep.warnings.push_back(std::to_string(rep.skipped) + " malformed NDBC rows skipped");
    return out;
}

inline std::vector<BuoyRecord> parse_ndbc_file(const std::string& path, ParseReport* report = nullptr) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open NDBC file '" + path + "'");
    return parse_ndbc(in, report);
}

/// Time-sorted union of several files; the first record wins at a repeated timestamp.
inline std::vector<BuoyRecord> merge(std::vector<std::vector<BuoyRecord>> parts) {
    std::vector<BuoyRecord> all;
    for (auto& p : parts) all.insert(all.end(), p.begin(), p.end());
    std::stable_sort(all.begin(), all.end(), [](const BuoyRecord& a, const BuoyRecord& b) { return a.time < b.time; });
    all.erase(std::unique(all.begin(), all.end(),
                          [](const BuoyRecord& a, const BuoyRecord& b) { return a.time == b.time; }),
              all.end());
    return all;
}

/// Writes records in the '#YY MM DD hh mm' layout with missing values as sentinels.
inline void serialize(std::ostream& os, const std::vector<BuoyRecord>& records) {
    os << "#YY  MM DD hh mm";
    for (auto n : channel_names) os << ' ' << n;
    os << "\n#yr  mo dy hr mn     m   sec   sec   m/s   hPa\n";
    using namespace std::chrono;
    for (const auto& r : records) {
        const auto day = floor<days>(r.time);
        const year_month_day ymd{day};
        const hh_mm_ss hms{r.time - day};
        char buf[64];
        std::snprintf(buf, sizeof buf, "%04d %02u %02u %02ld %02ld", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                      static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()));
        os << buf;
        for (std::size_t c = 0; c < channel_count; ++c) {
            const double x = r.values[c];
            os << ' ' << (std::isnan(x) ? format_number(detail::sentinel(static_cast<Channel>(c))) : format_number(x));
        }
        os << '\n';
    }
}

struct IsoWeek {
    int year = 0;
    unsigned week = 0;  // 1..53

    friend auto operator<=>(const IsoWeek&, const IsoWeek&) = default;
};

inline IsoWeek iso_week(std::chrono::sys_days d) {
    using namespace std::chrono;
    const unsigned iso = weekday{d}.iso_encoding();  // Monday = 1
    const sys_days thursday = d + days{4 - static_cast<int>(iso)};
    const year y = year_month_day{thursday}.year();
    const sys_days jan1 = sys_days{y / January / 1};
    return {static_cast<int>(y), static_cast<unsigned>((thursday - jan1).count() / 7 + 1)};
}

enum class WeeklyStatistic { first, max, mean };

inline WeeklyStatistic parse_weekly_statistic(const std::string& s) {
    if (s == "first") return WeeklyStatistic::first;
    if (s == "max") return WeeklyStatistic::max;
    if (s == "mean") return WeeklyStatistic::mean;
    throw ValidationError("weekly statistic must be first, max or mean");
}

struct WeeklyObservation {
    IsoWeek week;
    double value = 0.0;
};

struct RawWeeklySeries {
    std::string name;
    std::vector<WeeklyObservation> obs;  // ascending weeks, finite values
};

/// One value per ISO week and channel from time-sorted records; weeks without
/// a valid observation are dropped.
inline std::vector<RawWeeklySeries> subsample_weekly(const std::vector<BuoyRecord>& records,
                                                     WeeklyStatistic stat = WeeklyStatistic::first) {
    require(std::is_sorted(records.begin(), records.end(),
                           [](const BuoyRecord& a, const BuoyRecord& b) { return a.time < b.time; }),
            "subsample_weekly: records must be time-sorted");
    std::vector<RawWeeklySeries> out(channel_count);
    std::vector<std::size_t> counts(channel_count, 0);
    for (std::size_t c = 0; c < channel_count; ++c) out[c].name = channel_names[c];
    for (const auto& r : records) {
        const IsoWeek w = iso_week(std::chrono::floor<std::chrono::days>(r.time));
        for (std::size_t c = 0; c < channel_count; ++c) {
            const double x = r.values[c];
            if (std::isnan(x)) continue;
            auto& s = out[c].obs;
            if (s.empty() || s.back().week != w) {
                s.push_back({w, x});
                counts[c] = 1;
                continue;
            }
            if (stat == WeeklyStatistic::max) s.back().value = std::max(s.back().value, x);
            else if (stat == WeeklyStatistic::mean) s.back().value += (x - s.back().value) / static_cast<double>(++counts[c]);
        }
    }
    bool any = false;
    for (const auto& s : out) any = any || !s.obs.empty();
    if (!any) throw ValidationError("subsample_weekly: no valid observations");
    return out;
}

inline constexpr unsigned weeks_per_year = 52;

/// Week-of-year bucket: ISO week with week 53 folded into 52.
inline unsigned week_bucket(const IsoWeek& w) { return std::min(w.week, weeks_per_year); }

struct WeeklySeries {
    std::string name;
    std::vector<IsoWeek> weeks;
    std::vector<unsigned> week_of_year;  // 1..52
    std::vector<double> values;          // (x - mu_w) / sigma_w + M
    std::array<double, weeks_per_year> mu{};
    std::array<double, weeks_per_year> sigma{};
    std::array<std::size_t, weeks_per_year> count{};
    double overall_mean = 0.0;
    Warnings warnings;
};

/// y_i = (x_i - mu_{w(i)}) / sigma_{w(i)} + M with per-week means and
/// sample standard deviations over all years and M the overall mean.
/// Buckets with fewer than 2 observations are dropped; a bucket with zero
/// spread is emitted as M.
inline WeeklySeries deseasonalize(const RawWeeklySeries& raw) {
    WeeklySeries s;
    s.name = raw.name;
    std::array<double, weeks_per_year> sum{}, sum2{};
    for (const auto& o : raw.obs) {
        const unsigned b = week_bucket(o.week) - 1;
        ++s.count[b];
        sum[b] += o.value;
    }
    for (unsigned b = 0; b < weeks_per_year; ++b) s.mu[b] = s.count[b] ? sum[b] / static_cast<double>(s.count[b]) : 0.0;
    for (const auto& o : raw.obs) {
        const unsigned b = week_bucket(o.week) - 1;
        sum2[b] += (o.value - s.mu[b]) * (o.value - s.mu[b]);
    }
    std::size_t dropped = 0;
    double total = 0.0;
    std::size_t kept = 0;
    for (unsigned b = 0; b < weeks_per_year; ++b) {
        if (s.count[b] >= 2) {
            s.sigma[b] = std::sqrt(sum2[b] / static_cast<double>(s.count[b] - 1));
            total += sum[b];
            kept += s.count[b];
        } else {
            s.sigma[b] = std::numeric_limits<double>::quiet_NaN();
            dropped += s.count[b];
        }
    }
    if (kept == 0) throw ValidationError("deseasonalize: no week-of-year bucket has 2 or more observations");
    if (dropped > 0)
        s.warnings.push_back(raw.name + ": " + std::to_string(dropped) +
                             " observations in week buckets with fewer than 2 values dropped");
    s.overall_mean = total / static_cast<double>(kept);
    bool flat = false;
    for (const auto& o : raw.obs) {
        const unsigned b = week_bucket(o.week) - 1;
        if (s.count[b] < 2) continue;
        s.weeks.push_back(o.week);
        s.week_of_year.push_back(b + 1);
        if (s.sigma[b] > 0.0) {
            s.values.push_back((o.value - s.mu[b]) / s.sigma[b] + s.overall_mean);
        } else {
            s.values.push_back(s.overall_mean);
            flat = true;
        }
    }
    if (flat) s.warnings.push_back(raw.name + ": zero spread in some week buckets, emitted as the overall mean");
    return s;
}

/// Weekly series aligned on ISO week; NaN where a variable has no value.
struct WeeklyTable {
    std::vector<IsoWeek> weeks;
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;

    const std::vector<double>& column(const std::string& name) const {
        for (std::size_t k = 0; k < names.size(); ++k)
            if (names[k] == name) return columns[k];
        throw ValidationError("variable '" + name + "' not found");
    }
};

inline WeeklyTable align(const std::vector<WeeklySeries>& series) {
    WeeklyTable t;
    std::map<IsoWeek, std::size_t> index;
    for (const auto& s : series)
        for (const auto& w : s.weeks) index.emplace(w, 0);
    std::size_t k = 0;
    for (auto& [w, i] : index) {
        i = k++;
        t.weeks.push_back(w);
    }
    for (const auto& s : series) {
        t.names.push_back(s.name);
        std::vector<double> col(t.weeks.size(), std::numeric_limits<double>::quiet_NaN());
        for (std::size_t j = 0; j < s.weeks.size(); ++j) col[index.at(s.weeks[j])] = s.values[j];
        t.columns.push_back(std::move(col));
    }
    return t;
}

/// CSV with columns week_index (1..52), year (ISO), then one column per variable.
inline void write_weekly_csv(std::ostream& os, const WeeklyTable& t) {
    os << "week_index,year";
    for (const auto& n : t.names) os << ',' << n;
    os << '\n';
    for (std::size_t i = 0; i < t.weeks.size(); ++i) {
        os << week_bucket(t.weeks[i]) << ',' << t.weeks[i].year;
        for (const auto& c : t.columns) os << ',' << format_number(c[i]);
        os << '\n';
    }
}

inline nlohmann::json metadata_json(const std::vector<WeeklySeries>& series, WeeklyStatistic stat) {
    nlohmann::json j;
    j["weekly_statistic"] = stat == WeeklyStatistic::first ? "first" : stat == WeeklyStatistic::max ? "max" : "mean";
    j["week_rule"] = "ISO week, 53 folded into 52";
    for (const auto& s : series) {
        nlohmann::json v;
        v["overall_mean"] = s.overall_mean;
        v["observations"] = s.values.size();
        auto& weeks = v["weeks"] = nlohmann::json::array();
        for (unsigned b = 0; b < weeks_per_year; ++b) {
            nlohmann::json w;
            w["week"] = b + 1;
            w["count"] = s.count[b];
            w["mu"] = s.count[b] ? nlohmann::json(s.mu[b]) : nlohmann::json(nullptr);
            w["sigma"] = std::isfinite(s.sigma[b]) ? nlohmann::json(s.sigma[b]) : nlohmann::json(nullptr);
            weeks.push_back(std::move(w));
        }
        v["warnings"] = s.warnings;
        j["variables"][s.name] = std::move(v);
    }
    return j;
}

/// Reads a table written by write_weekly_csv (or any CSV with a header): every
/// column other than week_index and year becomes a variable.
inline WeeklyTable read_weekly_csv(const CsvTable& csv) {
    WeeklyTable t;
    const bool has_year = csv.has_column("year");
    const bool has_week = csv.has_column("week_index");
    std::vector<double> years, weeks;
    if (has_year) years = csv.numeric_column("year");
    if (has_week) weeks = csv.numeric_column("week_index");
    for (std::size_t r = 0; r < csv.rows.size(); ++r)
        t.weeks.push_back({has_year ? static_cast<int>(years[r]) : 0,
                           has_week ? static_cast<unsigned>(weeks[r]) : static_cast<unsigned>(r + 1)});
    for (const auto& h : csv.header) {
        if (h == "week_index" || h == "year") continue;
        t.names.push_back(h);
        t.columns.push_back(csv.numeric_column(h));
    }
    return t;
}

/// Rows where both columns are finite.
inline std::pair<std::vector<double>, std::vector<double>> complete_cases(const std::vector<double>& x,
                                                                          const std::vector<double>& y) {
    std::pair<std::vector<double>, std::vector<double>> out;
    for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i)
        if (std::isfinite(x[i]) && std::isfinite(y[i])) {
            out.first.push_back(x[i]);
            out.second.push_back(y[i]);
        }
    return out;
}

}  // namespace tdep::ocean
