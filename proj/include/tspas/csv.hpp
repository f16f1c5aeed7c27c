#pragma once

// Minimal comma-separated reader for the flat, unquoted tables this toolkit
// exchanges (identifiers never contain commas).

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tspas/instance.hpp"

namespace tspas::csv {

class CsvError : public std::runtime_error {
public:
    CsvError(std::size_t line, const std::string& what)
        : std::runtime_error("csv line " + std::to_string(line) + ": " + what), line_(line) {}
    [[nodiscard]] std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

struct Record {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

struct Document {
    std::vector<std::string> header;
    std::vector<Record> records;

    [[nodiscard]] std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw CsvError(1, "missing column '" + std::string(name) + "'");
    }
};

inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.emplace_back(::tspas::detail::trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

/// Parses a header line plus records; blank lines are skipped and every
/// record must have the header's width.
inline Document parse(std::string_view text) {
    Document doc;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool have_header = false;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const auto line = ::tspas::detail::trim(text.substr(pos, nl - pos));
        pos = nl + 1;
        ++line_no;
        if (line.empty()) continue;
        auto fields = split(line);
        if (!have_header) {
            doc.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != doc.header.size())
            throw CsvError(line_no, "expected " + std::to_string(doc.header.size()) +
                                        " fields, got " + std::to_string(fields.size()));
        doc.records.push_back({line_no, std::move(fields)});
    }
    if (!have_header) throw CsvError(0, "empty file (no header)");
    return doc;
}

inline double to_double(std::string_view s, std::size_t line) {
    double v = 0.0;
    if (!::tspas::detail::parse_double(s, v))
        throw CsvError(line, "not a number: '" + std::string(s) + "'");
    return v;
}

inline long long to_int(std::string_view s, std::size_t line) {
    long long v = 0;
    if (!::tspas::detail::parse_int(s, v))
        throw CsvError(line, "not an integer: '" + std::string(s) + "'");
    return v;
}

}  // namespace tspas::csv
