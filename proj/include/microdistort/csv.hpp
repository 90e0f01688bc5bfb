#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "errors.hpp"

namespace microdistort {

/// Header plus rows of raw cells. Rows keep their original text so a file can
/// be rewritten with one column replaced and everything else untouched.
struct CsvTable {
    char delimiter = ',';
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column(std::string_view name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return i;
            }
        }
        return std::nullopt;
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line, char delimiter)
{
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delimiter) {
            cells.push_back(std::move(cell));
            cell.clear();
        } else {
            cell.push_back(c);
        }
    }
    cells.push_back(std::move(cell));
    return cells;
}

inline std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

inline void write_cell(std::ostream& out, const std::string& cell, char delimiter)
{
    if (cell.find_first_of(std::string{delimiter, '"', '\n'}) == std::string::npos) {
        out << cell;
        return;
    }
    out << '"';
    for (const char c : cell) {
        if (c == '"') {
            out << '"';
        }
        out << c;
    }
    out << '"';
}

// Days since 1970-01-01 for a proleptic Gregorian date (H. Hinnant's algorithm).
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) noexcept
{
    y -= m <= 2 ? 1 : 0;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

} // namespace detail

inline CsvTable parse_csv(std::istream& in, char delimiter = ',')
{
    CsvTable table;
    table.delimiter = delimiter;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!have_header) {
            if (line.empty()) {
                continue;
            }
            // Tolerate a UTF-8 byte order mark.
            if (line.rfind("\xEF\xBB\xBF", 0) == 0) {
                line.erase(0, 3);
            }
            for (auto& h : detail::split_csv_line(line, delimiter)) {
                table.header.push_back(detail::trim(h));
            }
            have_header = true;
            continue;
        }
        if (line.empty()) {
            continue;
        }
        table.rows.push_back(detail::split_csv_line(line, delimiter));
    }
    if (!have_header) {
        throw TraceLoadError("empty CSV input (no header row)");
    }
    return table;
}

inline CsvTable read_csv_file(const std::string& path, char delimiter = ',')
{
    std::ifstream in(path);
    if (!in) {
        throw TraceLoadError("cannot open '" + path + "'");
    }
    return parse_csv(in, delimiter);
}

inline void write_csv(std::ostream& out, const CsvTable& table)
{
    auto write_row = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i != 0) {
                out << table.delimiter;
            }
            detail::write_cell(out, row[i], table.delimiter);
        }
        out << '\n';
    };
    write_row(table.header);
    for (const auto& row : table.rows) {
        write_row(row);
    }
}

inline void write_csv_file(const std::string& path, const CsvTable& table)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write '" + path + "'");
    }
    write_csv(out, table);
}

/// Finite decimal, surrounding whitespace allowed.
inline std::optional<double> parse_decimal(std::string_view text)
{
    const std::string s = detail::trim(text);
    if (s.empty()) {
        return std::nullopt;
    }
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') {
        ++first;
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

/// Integer epoch seconds, or ISO-8601 "YYYY-MM-DD[T ]hh:mm[:ss[.fff]][Z|+hh:mm|-hh:mm]".
/// Fractional seconds are truncated.
inline std::optional<std::int64_t> parse_timestamp(std::string_view text)
{
    const std::string s = detail::trim(text);
    if (s.empty()) {
        return std::nullopt;
    }
    {
        std::int64_t secs = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), secs);
        if (ec == std::errc{} && ptr == s.data() + s.size()) {
            return secs;
        }
    }

    std::size_t pos = 0;
    auto read_int = [&](std::size_t digits) -> std::optional<int> {
        if (pos + digits > s.size()) {
            return std::nullopt;
        }
        int v = 0;
        for (std::size_t i = 0; i < digits; ++i) {
            const char c = s[pos + i];
            if (c < '0' || c > '9') {
                return std::nullopt;
            }
            v = v * 10 + (c - '0');
        }
        pos += digits;
        return v;
    };
    auto expect = [&](char c) {
        if (pos < s.size() && s[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    };

    const auto year = read_int(4);
    if (!year || !expect('-')) return std::nullopt;
    const auto month = read_int(2);
    if (!month || !expect('-')) return std::nullopt;
    const auto day = read_int(2);
    if (!day || *month < 1 || *month > 12 || *day < 1 || *day > 31) return std::nullopt;

    int hour = 0, minute = 0, second = 0;
    if (pos < s.size()) {
        if (!expect('T') && !expect(' ')) return std::nullopt;
        const auto h = read_int(2);
        if (!h || !expect(':')) return std::nullopt;
        const auto mi = read_int(2);
        if (!mi) return std::nullopt;
        hour = *h;
        minute = *mi;
        if (expect(':')) {
            const auto sec = read_int(2);
            if (!sec) return std::nullopt;
            second = *sec;
            if (expect('.')) {
                while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
                    ++pos;
                }
            }
        }
    }
    if (hour > 23 || minute > 59 || second > 60) return std::nullopt;

    std::int64_t offset = 0;
    if (expect('Z')) {
        // UTC
    } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
        const int sign = s[pos] == '-' ? -1 : 1;
        ++pos;
        const auto oh = read_int(2);
        if (!oh) return std::nullopt;
        expect(':');
        const auto om = read_int(2);
        if (!om) return std::nullopt;
        offset = sign * (*oh * 3600 + *om * 60);
    }
    if (pos != s.size()) return std::nullopt;

    const std::int64_t days = detail::days_from_civil(*year, static_cast<unsigned>(*month),
                                                      static_cast<unsigned>(*day));
    return days * 86400 + hour * 3600 + minute * 60 + second - offset;
}

} // namespace microdistort
