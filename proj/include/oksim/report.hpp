#pragma once
// Text reports: a human-readable block followed by a flat record,
//
//   [record]
//   delta_t = 174.21399999999999 fs
//   witness_product = 0.092499999999999999 1
//
// one "key = value unit" per line. Dimensionless values carry the unit "1".

#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "oksim/matrix_io.hpp"

namespace oksim {

class ReportParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ReportValue {
    double value = 0.0;
    std::string unit;
};

inline std::string fixed(double v, int precision)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

inline std::string sci(double v, int precision)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*e", precision, v);
    return buf;
}

class Report {
public:
    void line(std::string text) { lines_.push_back(std::move(text)); }

    void value(const std::string& key, double v, const std::string& unit)
    {
        if (key.empty() || key.find_first_of(" =\n") != std::string::npos)
            throw std::invalid_argument("report key must be non-empty without spaces or '=': " + key);
        if (unit.empty() || unit.find_first_of(" \n") != std::string::npos)
            throw std::invalid_argument("report unit must be one word: " + key);
        for (const auto& r : record_)
            if (r.first == key)
                throw std::invalid_argument("duplicate report key " + key);
        record_.emplace_back(key, ReportValue{v, unit});
    }

    std::string render() const
    {
        std::string out;
        for (const auto& l : lines_)
            out += l + "\n";
        out += "\n[record]\n";
        for (const auto& [k, v] : record_)
            out += k + " = " + format_number(v.value) + " " + v.unit + "\n";
        return out;
    }

    const std::vector<std::pair<std::string, ReportValue>>& record() const { return record_; }

private:
    std::vector<std::string> lines_;
    std::vector<std::pair<std::string, ReportValue>> record_;
};

/// Reads the record block back.
inline std::map<std::string, ReportValue> parse_report(const std::string& text)
{
    std::map<std::string, ReportValue> out;
    std::istringstream is(text);
    std::string line;
    bool in_record = false;
    while (std::getline(is, line)) {
        if (!in_record) {
            in_record = line == "[record]";
            continue;
        }
        if (line.empty())
            continue;
        std::istringstream ls(line);
        std::string key, eq, num, unit, extra;
        if (!(ls >> key >> eq >> num >> unit) || eq != "=" || (ls >> extra))
            throw ReportParseError("malformed record line: " + line);
        const auto v = detail::parse_double(num);
        if (!v)
            throw ReportParseError("record value is not a number: " + line);
        if (!out.emplace(key, ReportValue{*v, unit}).second)
            throw ReportParseError("duplicate record key: " + key);
    }
    if (!in_record)
        throw ReportParseError("no [record] block");
    return out;
}

} // namespace oksim
