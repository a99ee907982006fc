#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "adaem/errors.hpp"

namespace adaem {

// ---------------------------------------------------------------------------
// Small CSV / text helpers shared by the loaders and writers. None of the
// file formats here use quoting, so a plain comma split is all we need.
// ---------------------------------------------------------------------------

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// from_chars-based parsers with a context string for error messages, e.g.
// "irradiance.csv line 17". Throws ParseError on any trailing garbage.
inline double parse_double(std::string_view s, const std::string& context) {
    s = trim(s);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError(context + ": expected a number, got '" + std::string(s) + "'");
    }
    return value;
}

inline long long parse_int(std::string_view s, const std::string& context) {
    s = trim(s);
    long long value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw ParseError(context + ": expected an integer, got '" + std::string(s) + "'");
    }
    return value;
}

// ---------------------------------------------------------------------------
// Timestamps. Data files carry UTC ISO-8601 stamps (2024-06-01T13:00:00Z).
// We only ever need whole seconds, so the representation is epoch seconds.
// Calendar conversion uses the classic days-from-civil arithmetic.
// ---------------------------------------------------------------------------

inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u
                         + static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yr = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yr + (m <= 2));
}

inline std::int64_t parse_timestamp(std::string_view s, const std::string& context) {
    s = trim(s);
    // Accept 2024-06-01T13:00:00 or 2024-06-01T13:00, optional trailing Z.
    if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
    const bool with_seconds = s.size() == 19;
    if ((s.size() != 16 && s.size() != 19) || s[4] != '-' || s[7] != '-'
        || (s[10] != 'T' && s[10] != ' ') || s[13] != ':'
        || (with_seconds && s[16] != ':')) {
        throw ParseError(context + ": expected ISO-8601 timestamp, got '" + std::string(s) + "'");
    }
    auto field = [&](std::size_t pos, std::size_t len) {
        return parse_int(s.substr(pos, len), context);
    };
    int year = static_cast<int>(field(0, 4));
    int month = static_cast<int>(field(5, 2));
    int day = static_cast<int>(field(8, 2));
    int hour = static_cast<int>(field(11, 2));
    int minute = static_cast<int>(field(14, 2));
    int second = with_seconds ? static_cast<int>(field(17, 2)) : 0;
    if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60) {
        throw ParseError(context + ": timestamp field out of range in '" + std::string(s) + "'");
    }
    return days_from_civil(year, month, day) * 86400
           + hour * 3600 + minute * 60 + second;
}

inline std::string format_timestamp(std::int64_t epoch_s) {
    std::int64_t days = epoch_s / 86400;
    std::int64_t rem = epoch_s % 86400;
    if (rem < 0) { rem += 86400; days -= 1; }
    int y = 0, m = 0, d = 0;
    civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                  static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                  static_cast<int>(rem % 60));
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// Numeric formatting for CSV output. %.10g keeps values round-trippable for
// our magnitude range while avoiding the 0.30000000000000004 noise that
// max-precision printing produces.
// ---------------------------------------------------------------------------

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
}

// Bit-exact double round-trip for model files: hexfloat out, strtod back in.
inline std::string fmt_double_exact(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%a", v);
    return std::string(buf);
}

inline double parse_double_exact(std::string_view s, const std::string& context) {
    s = trim(s);
    std::string tmp(s);
    char* end = nullptr;
    double value = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size() || tmp.empty()) {
        throw ParseError(context + ": expected a number, got '" + tmp + "'");
    }
    return value;
}

// ---------------------------------------------------------------------------
// FNV-1a 64-bit. Used for config snapshots (hash of each input file) and for
// the policy-isolation checks in the simulator tests.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a64(s.data(), s.size(), h);
}

} // namespace adaem
