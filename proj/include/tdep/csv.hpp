#pragma once

// Minimal CSV reading and number formatting for the exchange files.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tdep/error.hpp"

namespace tdep {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column_index(const std::string& name) const {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return k;
        throw ValidationError("column '" + name + "' not found");
    }

    bool has_column(const std::string& name) const {
        for (const auto& h : header)
            if (h == name) return true;
        return false;
    }

    /// Numeric column; empty cells and NA/NaN become NaN.
    std::vector<double> numeric_column(const std::string& name) const;
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cell));
            cell.clear();
        } else {
            cell += c;
        }
    }
    out.push_back(trim(cell));
    return out;
}

inline double parse_cell(const std::string& s, const std::string& column, std::size_t row) {
    if (s.empty() || s == "NA" || s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || used == 0)
        throw ValidationError("column '" + column + "' row " + std::to_string(row + 1) + ": not a number: '" + s +
                              "'");
    return x;
}

}  // namespace detail

inline std::vector<double> CsvTable::numeric_column(const std::string& name) const {
    const std::size_t k = column_index(name);
    std::vector<double> out(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        out[r] = k < rows[r].size() ? detail::parse_cell(rows[r][k], name, r) : std::numeric_limits<double>::quiet_NaN();
    return out;
}

/// Header row first; blank lines and lines starting with '#' are skipped.
inline CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        const std::string s = detail::trim(line);
        if (s.empty() || s.front() == '#') continue;
        auto cells = detail::split_csv_line(s);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
        } else {
            t.rows.push_back(std::move(cells));
        }
    }
    if (!have_header) throw IoError("CSV input has no header row");
    return t;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return read_csv(in);
}

/// Shortest round-tripping representation; empty for NaN.
inline std::string format_number(double x) {
    if (std::isnan(x)) return "";
    char buf[40];
    for (int prec = 6; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

}  // namespace tdep
