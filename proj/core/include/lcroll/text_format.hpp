// Number <-> text helpers shared by the CSV/JSON writers. Doubles are rendered
// with the shortest decimal form that parses back to the same bits, so file
// round-trips are lossless and repeated runs are byte-identical.
#pragma once

#include <charconv>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lcroll {

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_int(long long v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Parses a full token as a double; throws std::invalid_argument with the
// offending text when the token is empty, has trailing junk, or overflows.
inline double parse_double(std::string_view token) {
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last)
        throw std::invalid_argument("not a number: '" + std::string(token) + "'");
    return value;
}

inline long long parse_int(std::string_view token) {
    long long value = 0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last)
        throw std::invalid_argument("not an integer: '" + std::string(token) + "'");
    return value;
}

// Splits one CSV line on commas. Fields in the formats written here never
// contain commas, quotes, or newlines, so no quoting layer is needed.
inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            fields.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return fields;
}

}  // namespace lcroll
