#include "safepl/app.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace safepl::app {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? pos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

int parse_int(const std::string& s, const std::string& where, const std::string& column) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
        throw DataError(where + ": column " + column + " expects an integer, got '" + s + "'");
    return v;
}

double parse_double(const std::string& s, const std::string& where, const std::string& column) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
        throw DataError(where + ": column " + column + " expects a number, got '" + s + "'");
    return v;
}

// x<k> headers ordered by k.
std::vector<std::string> default_x_columns(const std::vector<std::string>& header) {
    std::vector<std::pair<int, std::string>> xs;
    for (const auto& h : header) {
        if (h.size() < 2 || h[0] != 'x') continue;
        int k = 0;
        auto [p, ec] = std::from_chars(h.data() + 1, h.data() + h.size(), k);
        if (ec == std::errc() && p == h.data() + h.size()) xs.emplace_back(k, h);
    }
    std::sort(xs.begin(), xs.end());
    std::vector<std::string> out;
    for (auto& [k, h] : xs) out.push_back(h);
    return out;
}

}  // namespace

Dataset ingest_text(const std::string& text, const ColumnMap& columns, const ActionSet& actions,
                    const PolicyRule& baseline, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError(origin + ": empty file, expected a header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = split(line);

    auto find = [&](const std::string& name) -> std::optional<std::size_t> {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    auto require = [&](const std::string& name) {
        auto k = find(name);
        if (!k) throw DataError(origin + " line 1: missing column '" + name + "'");
        return *k;
    };

    const auto xnames = columns.x.empty() ? default_x_columns(header) : columns.x;
    if (xnames.empty()) throw DataError(origin + " line 1: no covariate columns (expected x1..xp)");
    std::vector<std::size_t> xcol;
    for (const auto& n : xnames) xcol.push_back(require(n));
    const auto acol = require(columns.a);
    const auto ycol = require(columns.y);
    const auto zcol = find(columns.z), ecol = find(columns.e), dcol = find(columns.d);
    if (zcol && !ecol) throw DataError(origin + " line 1: column " + columns.z + " present without " + columns.e);
    if (ecol && !zcol) throw DataError(origin + " line 1: column " + columns.e + " present without " + columns.z);

    std::vector<Observation> rows;
    std::size_t lineno = 1;
    std::size_t blank_at = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            if (!blank_at) blank_at = lineno;
            continue;
        }
        const std::string where = origin + " line " + std::to_string(lineno);
        if (blank_at) throw DataError(origin + " line " + std::to_string(blank_at) + ": blank line inside data");
        const auto f = split(line);
        if (f.size() != header.size())
            throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(f.size()));
        Observation r;
        for (std::size_t k = 0; k < xcol.size(); ++k) r.x.push_back(parse_int(f[xcol[k]], where, xnames[k]));
        r.action = parse_int(f[acol], where, columns.a);
        r.outcome = parse_int(f[ycol], where, columns.y);
        if (r.outcome != 0 && r.outcome != 1)
            throw DataError(where + ": outcome " + columns.y + " must be 0 or 1, got " + f[ycol]);
        if (!actions.contains(r.action))
            throw DataError(where + ": action " + f[acol] + " is not in the action set");
        if (zcol) {
            r.assignment = parse_int(f[*zcol], where, columns.z);
            r.propensity = parse_double(f[*ecol], where, columns.e);
        }
        if (dcol) r.decision = parse_int(f[*dcol], where, columns.d);
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw DataError(origin + ": no data rows");
    // Rows were read without gaps, so row i sits on line i + 2.
    try {
        return Dataset(std::move(rows), actions, baseline, 2);
    } catch (const DataError& e) {
        throw DataError(origin + " " + e.what());
    }
}

Dataset ingest(const std::filesystem::path& csv, const ColumnMap& columns, const ActionSet& actions,
               const PolicyRule& baseline) {
    std::ifstream in(csv, std::ios::binary);
    if (!in) throw DataError("cannot open data file " + csv.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ingest_text(ss.str(), columns, actions, baseline, csv.string());
}

}  // namespace safepl::app
