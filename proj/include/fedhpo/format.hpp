#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

namespace fedhpo {

/// Rounds x to the given number of decimal places, resolving decimal ties
/// (e.g. 0.8985 to 3 places) away from zero.
///
/// Values such as 0.8985 are not representable in binary, so a tie is
/// detected with a small relative tolerance on the scaled value instead of by
/// exact comparison.
inline long long round_scaled(double x, int places) {
    const double scaled = x * std::pow(10.0, places);
    const double floor_v = std::floor(scaled);
    const double frac = scaled - floor_v;
    const double tol = 1e-9 * std::max(1.0, std::abs(scaled));
    if (std::abs(frac - 0.5) <= tol) return static_cast<long long>(scaled >= 0.0 ? floor_v + 1.0 : floor_v);
    return std::llround(scaled);
}

inline double round_decimal(double x, int places) {
    return static_cast<double>(round_scaled(x, places)) / std::pow(10.0, places);
}

/// Fixed-point text with exactly `places` decimals, built from the integer
/// produced by round_scaled so the digits never depend on printf's binary
/// rounding.
inline std::string format_fixed(double x, int places) {
    if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
    long long v = round_scaled(x, places);
    const bool negative = v < 0;
    const unsigned long long a = negative ? static_cast<unsigned long long>(-v) : static_cast<unsigned long long>(v);
    unsigned long long scale = 1;
    for (int i = 0; i < places; ++i) scale *= 10;
    std::string out = negative ? "-" : "";
    out += std::to_string(a / scale);
    if (places > 0) {
        std::string frac = std::to_string(a % scale);
        out += '.' + std::string(static_cast<std::size_t>(places) - frac.size(), '0') + frac;
    }
    return out;
}

/// Rounds to `digits` significant digits with the same tie rule.
inline double round_significant(double x, int digits) {
    if (x == 0.0 || !std::isfinite(x)) return x;
    const int exponent = static_cast<int>(std::floor(std::log10(std::abs(x))));
    const int places = digits - 1 - exponent;
    const double scaled = x * std::pow(10.0, places);
    const double floor_v = std::floor(scaled);
    const double tol = 1e-9 * std::max(1.0, std::abs(scaled));
    double r;
    if (std::abs(scaled - floor_v - 0.5) <= tol)
        r = scaled >= 0.0 ? floor_v + 1.0 : floor_v;
    else
        r = std::round(scaled);
    return r / std::pow(10.0, places);
}

/// Shortest text that parses back to the same double.
inline std::string format_exact(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace fedhpo
