// SPDX-License-Identifier: Apache-2.0
#include "instructmine/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>

#include "instructmine/error.hpp"

namespace instructmine::csv {

std::vector<Row> parse(std::string_view text, std::string_view source) {
    std::vector<Row> rows;
    Row row;
    std::string cell;
    bool quoted = false;
    bool row_has_content = false;
    std::size_t line = 1;
    auto end_row = [&] {
        if (row_has_content || !row.empty()) {
            row.push_back(std::move(cell));
            rows.push_back(std::move(row));
        }
        row.clear();
        cell.clear();
        row_has_content = false;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                cell.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                quoted = true;
                row_has_content = true;
                break;
            case ',':
                row.push_back(std::move(cell));
                cell.clear();
                row_has_content = true;
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') break;
                cell.push_back(c);
                row_has_content = true;
                break;
            case '\n':
                end_row();
                ++line;
                break;
            default:
                cell.push_back(c);
                row_has_content = true;
        }
    }
    if (quoted) throw DataError(std::string(source) + ": unterminated quote near line " + std::to_string(line));
    end_row();
    return rows;
}

std::string field(std::string_view value) {
    if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string join(const Row& row) {
    std::string out;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out.push_back(',');
        out += field(row[i]);
    }
    return out;
}

std::string number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    std::array<char, 64> buffer{};
    auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
    return std::string(buffer.data(), end);
}

double parse_number(std::string_view text, std::string_view what) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
        throw DataError(std::string(what) + ": \"" + std::string(text) + "\" is not a number");
    }
    return value;
}

}  // namespace instructmine::csv
