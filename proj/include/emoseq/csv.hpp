#pragma once

// Minimal reader/writer for the toolkit's small numeric CSV files.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "emoseq/binary_io.hpp"
#include "emoseq/error.hpp"

namespace emoseq::csv {

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

/// Splits into lines, dropping the trailing empty line and any '\r'.
inline std::vector<std::string_view> lines(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto pos = text.find('\n', start);
        if (pos == std::string_view::npos) {
            pos = text.size();
        }
        auto line = text.substr(start, pos - start);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        out.push_back(line);
        start = pos + 1;
    }
    return out;
}

inline bool parse_double(std::string_view field, double& out) {
    field = trim(field);
    if (!field.empty() && field.front() == '+') {
        field.remove_prefix(1);
    }
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, out);
    return ec == std::errc() && ptr == end && !field.empty();
}

inline bool parse_int(std::string_view field, long long& out) {
    field = trim(field);
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, out);
    return ec == std::errc() && ptr == end && !field.empty();
}

/// Shortest representation that round-trips a double.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

inline std::string format_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

/// Numeric table with a header row; every data row must have as many
/// fields as the header. Row numbers in errors are 1-based file lines.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> line_numbers;
};

inline Table parse_table(std::string_view text, const std::string& source) {
    auto ls = lines(text);
    if (ls.empty()) {
        throw SchemaError(source + ": empty CSV");
    }
    Table table;
    for (auto f : split(ls[0])) {
        table.header.emplace_back(trim(f));
    }
    for (std::size_t i = 1; i < ls.size(); ++i) {
        if (trim(ls[i]).empty()) {
            continue;
        }
        auto fields = split(ls[i]);
        if (fields.size() != table.header.size()) {
            throw SchemaError(source + ": row " + std::to_string(i + 1) + " has " +
                              std::to_string(fields.size()) + " columns, expected " +
                              std::to_string(table.header.size()));
        }
        std::vector<double> row(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (!parse_double(fields[c], row[c])) {
                throw SchemaError(source + ": row " + std::to_string(i + 1) + " column " +
                                  std::to_string(c + 1) + " is not a number: '" +
                                  std::string(trim(fields[c])) + "'");
            }
        }
        table.rows.push_back(std::move(row));
        table.line_numbers.push_back(i + 1);
    }
    return table;
}

inline Table read_table(const std::filesystem::path& path) {
    return parse_table(read_file_bytes(path), path.string());
}

}  // namespace emoseq::csv
