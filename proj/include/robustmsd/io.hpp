#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "numerics.hpp"

namespace robustmsd::io {

/// Daily prices turned into net returns r_t = P_t / P_{t-1} - 1.
struct PriceData {
    std::vector<std::string> dates;  ///< price dates, one more than return rows
    std::vector<std::string> assets;
    Matrix returns;
};

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline bool is_iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (s[i] < '0' || s[i] > '9') return false;
    }
    return true;
}

inline double parse_double(const std::string& cell, const std::string& where) {
    const std::string t = trim(cell);
    robustmsd::detail::require(!t.empty(), ErrorKind::Parse, "missing value at " + where);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        throw Error(ErrorKind::Parse, "not a number at " + where + ": '" + t + "'");
    }
    robustmsd::detail::require(used == t.size(), ErrorKind::Parse, "trailing characters at " + where + ": '" + t + "'");
    return v;
}

} // namespace detail

/// Reads `date,asset1,asset2,...` with ISO dates in strictly increasing order.
inline PriceData ingest_prices(const std::string& path) {
    std::ifstream in(path);
    robustmsd::detail::require(in.good(), ErrorKind::Io, "cannot open price file " + path);
    std::string line;
    robustmsd::detail::require(static_cast<bool>(std::getline(in, line)), ErrorKind::Parse, "price file is empty: " + path);
    auto header = detail::split(line);
    robustmsd::detail::require(header.size() >= 2, ErrorKind::Parse, "header needs a date column and at least one asset");
    PriceData data;
    for (std::size_t j = 1; j < header.size(); ++j) data.assets.push_back(detail::trim(header[j]));
    const std::size_t d = data.assets.size();

    std::vector<std::vector<double>> prices;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split(line);
        const std::string where_row = "row " + std::to_string(row);
        robustmsd::detail::require(cells.size() == d + 1, ErrorKind::Parse,
                                   where_row + " has " + std::to_string(cells.size()) + " columns, expected " +
                                       std::to_string(d + 1));
        const std::string date = detail::trim(cells[0]);
        robustmsd::detail::require(detail::is_iso_date(date), ErrorKind::Parse, where_row + ": bad date '" + date + "'");
        if (!data.dates.empty()) {
            robustmsd::detail::require(date != data.dates.back(), ErrorKind::Parse, where_row + ": duplicate date " + date);
            robustmsd::detail::require(date > data.dates.back(), ErrorKind::Parse,
                                       where_row + ": date " + date + " is not after " + data.dates.back());
        }
        std::vector<double> p(d);
        for (std::size_t j = 0; j < d; ++j) {
            const std::string where = where_row + ", column " + data.assets[j];
            p[j] = detail::parse_double(cells[j + 1], where);
            robustmsd::detail::require(std::isfinite(p[j]) && p[j] > 0.0, ErrorKind::Parse, "non-positive price at " + where);
        }
        data.dates.push_back(date);
        prices.push_back(std::move(p));
    }
    robustmsd::detail::require(prices.size() >= 2, ErrorKind::Parse, "need at least two price rows");
    data.returns.resize(static_cast<Eigen::Index>(prices.size() - 1), static_cast<Eigen::Index>(d));
    for (std::size_t t = 1; t < prices.size(); ++t) {
        for (std::size_t j = 0; j < d; ++j) {
            data.returns(static_cast<Eigen::Index>(t - 1), static_cast<Eigen::Index>(j)) = prices[t][j] / prices[t - 1][j] - 1.0;
        }
    }
    return data;
}

/// Fixed-width number formatting used by every output table.
inline std::string fmt(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

/// Shortest round-trippable representation for solver quantities.
inline std::string fmt_exact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// In-memory CSV table: header plus rows of already formatted cells.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) {
        robustmsd::detail::require(row.size() == header.size(), ErrorKind::InvalidArgument, "row width differs from header");
        rows.push_back(std::move(row));
    }

    std::string str() const {
        std::string out;
        auto emit = [&out](const std::vector<std::string>& cells) {
            for (std::size_t j = 0; j < cells.size(); ++j) {
                if (j) out += ',';
                out += cells[j];
            }
            out += '\n';
        };
        emit(header);
        for (const auto& r : rows) emit(r);
        return out;
    }
};

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    robustmsd::detail::require(out.good(), ErrorKind::Io, "cannot write " + path);
    out << text;
    robustmsd::detail::require(out.good(), ErrorKind::Io, "write failed for " + path);
}

inline Table read_table(const std::string& path) {
    std::ifstream in(path);
    robustmsd::detail::require(in.good(), ErrorKind::Io, "cannot open " + path);
    Table t;
    std::string line;
    robustmsd::detail::require(static_cast<bool>(std::getline(in, line)), ErrorKind::Parse, "empty table " + path);
    t.header = detail::split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        t.add(detail::split(line));
    }
    return t;
}

/// Numeric column of a table read back from disk.
inline std::vector<double> column(const Table& t, const std::string& name) {
    std::size_t idx = t.header.size();
    for (std::size_t j = 0; j < t.header.size(); ++j) {
        if (t.header[j] == name) idx = j;
    }
    robustmsd::detail::require(idx < t.header.size(), ErrorKind::Parse, "no column named " + name);
    std::vector<double> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        out.push_back(detail::parse_double(t.rows[i][idx], "row " + std::to_string(i + 2) + ", column " + name));
    }
    return out;
}

} // namespace robustmsd::io
