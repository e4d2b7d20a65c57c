#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace overton::fmt {

/// Fixed-point rendering; "-0.000" is normalized to "0.000".
inline std::string fixed(double v, int digits = 3) {
    if (std::isnan(v)) return "n/a";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    std::string s = buf;
    if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

inline std::string fixed(const std::optional<double>& v, int digits = 3) {
    return v ? fixed(*v, digits) : "n/a";
}

/// p-values: fixed for moderate values, scientific below 0.001.
inline std::string pvalue(double p) {
    if (p >= 0.001 || p == 0) return fixed(p, 3);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1e", p);
    return buf;
}

/// Markdown pipe table.
inline std::string table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
    std::string out = "|";
    for (const auto& h : header) out += " " + h + " |";
    out += "\n|";
    for (std::size_t i = 0; i < header.size(); ++i) out += i == 0 ? " --- |" : " ---: |";
    out += "\n";
    for (const auto& r : rows) {
        out += "|";
        for (const auto& c : r) out += " " + c + " |";
        out += "\n";
    }
    return out;
}

}  // namespace overton::fmt
