#pragma once
// Delimited matrix text files with a '#'-prefixed "key: value" header.
//
//   # format: oksim-matrix 1
//   # rows: 3
//   # cols: 2
//   # row_axis: delay_s
//   # row_center: 0
//   # row_step: 23.4375
//   # row_unit: fs
//   1.5 2
//   ...
//
// Values are written with 17 significant digits so a write/read cycle is exact.

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "oksim/grid.hpp"
#include "oksim/scan.hpp"

namespace oksim {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class MalformedHeaderError : public IoError {
public:
    using IoError::IoError;
};
class CountMismatchError : public IoError {
public:
    using IoError::IoError;
};
class MalformedBodyError : public IoError {
public:
    using IoError::IoError;
};

inline const std::string matrix_format_tag = "oksim-matrix 1";

/// Unit strings this reader understands; anything else in a *unit key draws a warning.
inline const std::set<std::string>& known_units()
{
    static const std::set<std::string> units{"1", "fs", "ps", "s", "nm", "mm", "rad/fs", "fs^2", "Hz",
                                             "counts", "counts/s", "probability", "arb"};
    return units;
}

struct MatrixFile {
    std::vector<std::pair<std::string, std::string>> header; // in file order, excluding format/rows/cols
    RealMatrix values;
    std::vector<std::string> warnings; // filled by the reader

    std::optional<std::string> get(const std::string& key) const
    {
        for (const auto& [k, v] : header)
            if (k == key)
                return v;
        return std::nullopt;
    }

    void set(const std::string& key, const std::string& value)
    {
        for (auto& [k, v] : header)
            if (k == key) {
                v = value;
                return;
            }
        header.emplace_back(key, value);
    }

    std::string require(const std::string& key) const
    {
        auto v = get(key);
        if (!v)
            throw MalformedHeaderError("matrix header lacks key '" + key + "'");
        return *v;
    }
};

inline std::string format_number(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(const std::string& s)
{
    if (s.empty())
        return std::nullopt;
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    // ERANGE on underflow still returns the exact subnormal; only overflow is rejected
    if (end != s.c_str() + s.size() || (errno == ERANGE && std::isinf(v)))
        return std::nullopt;
    return v;
}

inline std::size_t parse_count(const MatrixFile& f, const std::string& key)
{
    const auto s = f.require(key);
    std::size_t pos = 0;
    unsigned long long n = 0;
    try {
        n = std::stoull(s, &pos);
    } catch (const std::exception&) {
        pos = std::string::npos;
    }
    if (pos != s.size() || s.empty() || s[0] == '-')
        throw MalformedHeaderError("matrix header '" + key + "' is not a count: " + s);
    return static_cast<std::size_t>(n);
}

} // namespace detail

inline std::string to_string(const MatrixFile& f)
{
    std::string out;
    out += "# format: " + matrix_format_tag + "\n";
    out += "# rows: " + std::to_string(f.values.rows()) + "\n";
    out += "# cols: " + std::to_string(f.values.cols()) + "\n";
    for (const auto& [k, v] : f.header) {
        if (k.empty() || k.find(':') != std::string::npos || k.find('\n') != std::string::npos ||
            v.find('\n') != std::string::npos)
            throw MalformedHeaderError("matrix header entry cannot be written: '" + k + "'");
        out += "# " + k + ": " + v + "\n";
    }
    for (Eigen::Index r = 0; r < f.values.rows(); ++r) {
        for (Eigen::Index c = 0; c < f.values.cols(); ++c) {
            if (c)
                out += '\t';
            out += format_number(f.values(r, c));
        }
        out += '\n';
    }
    return out;
}

inline MatrixFile parse_matrix(const std::string& text, const std::string& source = "<matrix>")
{
    MatrixFile f;
    std::istringstream is(text);
    std::string line;
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 0;
    bool seen_format = false;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string where = source + ":" + std::to_string(lineno);
        if (!line.empty() && line[0] == '#') {
            if (!rows.empty())
                throw MalformedHeaderError(where + ": header line after data");
            const auto body = detail::trim(line.substr(1));
            const auto colon = body.find(':');
            if (colon == std::string::npos || colon == 0)
                throw MalformedHeaderError(where + ": expected '# key: value'");
            const auto key = detail::trim(body.substr(0, colon));
            const auto value = detail::trim(body.substr(colon + 1));
            if (key == "format") {
                if (value != matrix_format_tag)
                    throw MalformedHeaderError(where + ": unsupported format '" + value + "'");
                seen_format = true;
                continue;
            }
            if (f.get(key))
                throw MalformedHeaderError(where + ": duplicate key '" + key + "'");
            f.header.emplace_back(key, value);
            if (key.size() >= 4 && key.compare(key.size() - 4, 4, "unit") == 0 && !known_units().count(value))
                f.warnings.push_back(where + ": unknown unit '" + value + "' for " + key);
            continue;
        }
        if (detail::trim(line).empty())
            continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) {
            const auto v = detail::parse_double(tok);
            if (!v)
                throw MalformedBodyError(where + ": not a number: '" + tok + "'");
            row.push_back(*v);
        }
        rows.push_back(std::move(row));
    }
    if (!seen_format)
        throw MalformedHeaderError(source + ": missing '# format: " + matrix_format_tag + "'");
    const auto nr = detail::parse_count(f, "rows");
    const auto nc = detail::parse_count(f, "cols");
    std::erase_if(f.header, [](const auto& kv) { return kv.first == "rows" || kv.first == "cols"; });
    if (rows.size() != nr)
        throw CountMismatchError(source + ": header declares " + std::to_string(nr) + " rows, body has " +
                                 std::to_string(rows.size()));
    f.values.resize(static_cast<Eigen::Index>(nr), static_cast<Eigen::Index>(nc));
    for (std::size_t r = 0; r < nr; ++r) {
        if (rows[r].size() != nc)
            throw CountMismatchError(source + ": row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                                     " values, header declares " + std::to_string(nc));
        for (std::size_t c = 0; c < nc; ++c)
            f.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return f;
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw IoError("cannot open " + path.string() + " for writing");
    os << text;
    if (!os.flush())
        throw IoError("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline void save_matrix(const std::filesystem::path& path, const MatrixFile& f) { write_text(path, to_string(f)); }

inline MatrixFile load_matrix(const std::filesystem::path& path) { return parse_matrix(read_text(path), path.string()); }

// Axis metadata uses the prefix "row" or "col".
inline void set_axis(MatrixFile& f, const std::string& prefix, const AxisGrid& axis, const std::string& name,
                     const std::string& unit)
{
    f.set(prefix + "_axis", name);
    f.set(prefix + "_center", format_number(axis.center));
    f.set(prefix + "_step", format_number(axis.step));
    f.set(prefix + "_unit", unit);
}

inline AxisGrid get_axis(const MatrixFile& f, const std::string& prefix)
{
    auto num = [&](const std::string& key) {
        const auto s = f.require(key);
        const auto v = detail::parse_double(s);
        if (!v)
            throw MalformedHeaderError("matrix header '" + key + "' is not a number: " + s);
        return *v;
    };
    const auto count = static_cast<std::size_t>(prefix == "row" ? f.values.rows() : f.values.cols());
    return {num(prefix + "_center"), num(prefix + "_step"), count};
}

inline MatrixFile map_file(const Map2D& m, const std::string& name_s, const std::string& name_i,
                           const std::string& axis_unit, const std::string& value_unit)
{
    check_shape(m);
    MatrixFile f;
    f.values = m.values;
    set_axis(f, "row", m.axis_s, name_s, axis_unit);
    set_axis(f, "col", m.axis_i, name_i, axis_unit);
    f.set("value_unit", value_unit);
    return f;
}

inline Map2D to_map(const MatrixFile& f) { return {get_axis(f, "row"), get_axis(f, "col"), f.values}; }

/// Column table, e.g. a profile (x, y) or a gate (t, g).
inline MatrixFile columns_file(const std::vector<std::string>& names, const std::vector<std::string>& units,
                               const std::vector<std::vector<double>>& columns)
{
    if (names.size() != columns.size() || units.size() != columns.size() || columns.empty())
        throw IoError("columns_file: names, units and columns must match");
    const auto n = columns.front().size();
    MatrixFile f;
    f.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(columns.size()));
    std::string joined_names, joined_units;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c].size() != n)
            throw IoError("columns_file: columns differ in length");
        for (std::size_t r = 0; r < n; ++r)
            f.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = columns[c][r];
        joined_names += (c ? " " : "") + names[c];
        joined_units += (c ? " " : "") + units[c];
    }
    f.set("columns", joined_names);
    f.set("column_units", joined_units);
    return f;
}

inline CountMatrix to_counts(const MatrixFile& f, const std::string& what)
{
    CountMatrix out(f.values.rows(), f.values.cols());
    for (Eigen::Index k = 0; k < f.values.size(); ++k) {
        const double v = f.values(k);
        if (!(v >= 0.0) || v != std::floor(v) || v > 9.007199254740992e15)
            throw MalformedBodyError(what + ": counts must be non-negative integers");
        out(k) = static_cast<std::int64_t>(v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// ScanResult as a directory of matrix files sharing one delay grid.

inline void save_scan(const std::filesystem::path& dir, const ScanResult& s)
{
    std::filesystem::create_directories(dir);
    auto file = [&](const RealMatrix& v, const std::string& unit) {
        MatrixFile f = map_file({s.delay_s, s.delay_i, v}, "delay_s", "delay_i", "fs", unit);
        f.set("dwell", format_number(s.dwell_s));
        f.set("dwell_unit", "s");
        f.set("rep_rate", format_number(s.rep_rate_hz));
        f.set("rep_rate_unit", "Hz");
        f.set("seed", std::to_string(s.seed));
        return f;
    };
    save_matrix(dir / "raw.txt", file(s.raw.cast<double>(), "counts"));
    save_matrix(dir / "background.txt", file(s.background_estimate.cast<double>(), "counts"));
    save_matrix(dir / "singles_s.txt", file(s.singles_s.cast<double>(), "counts"));
    save_matrix(dir / "singles_i.txt", file(s.singles_i.cast<double>(), "counts"));
    save_matrix(dir / "truth.txt", file(s.expected_truth, "counts/s"));
}

inline ScanResult load_scan(const std::filesystem::path& dir, std::vector<std::string>* warnings = nullptr)
{
    ScanResult s;
    auto load = [&](const char* name) {
        auto f = load_matrix(dir / name);
        if (warnings)
            warnings->insert(warnings->end(), f.warnings.begin(), f.warnings.end());
        return f;
    };
    const auto raw = load("raw.txt");
    s.delay_s = get_axis(raw, "row");
    s.delay_i = get_axis(raw, "col");
    const auto dwell = detail::parse_double(raw.require("dwell"));
    const auto rep = detail::parse_double(raw.require("rep_rate"));
    if (!dwell || !rep)
        throw MalformedHeaderError((dir / "raw.txt").string() + ": dwell or rep_rate is not a number");
    s.dwell_s = *dwell;
    s.rep_rate_hz = *rep;
    try {
        s.seed = std::stoull(raw.require("seed"));
    } catch (const std::logic_error&) {
        throw MalformedHeaderError((dir / "raw.txt").string() + ": seed is not an integer");
    }
    s.raw = to_counts(raw, "raw.txt");
    auto same_grid = [&](const MatrixFile& f, const char* name) {
        if (f.values.rows() != raw.values.rows() || f.values.cols() != raw.values.cols() ||
            get_axis(f, "row") != s.delay_s || get_axis(f, "col") != s.delay_i)
            throw CountMismatchError((dir / name).string() + ": grid differs from raw.txt");
        return f;
    };
    s.background_estimate = to_counts(same_grid(load("background.txt"), "background.txt"), "background.txt");
    s.singles_s = to_counts(same_grid(load("singles_s.txt"), "singles_s.txt"), "singles_s.txt");
    s.singles_i = to_counts(same_grid(load("singles_i.txt"), "singles_i.txt"), "singles_i.txt");
    if (std::filesystem::exists(dir / "truth.txt"))
        s.expected_truth = same_grid(load("truth.txt"), "truth.txt").values;
    return s;
}

} // namespace oksim
