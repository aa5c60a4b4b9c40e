// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace instructmine::csv {

using Row = std::vector<std::string>;

/// RFC 4180 subset: comma separated, double-quoted fields with "" escapes,
/// LF or CRLF line ends. Blank lines are skipped. Throws DataError on an
/// unterminated quote.
std::vector<Row> parse(std::string_view text, std::string_view source = "csv");

/// Quotes a field only when it contains a comma, quote or line break.
std::string field(std::string_view value);

std::string join(const Row& row);

/// Shortest text that reads back to the same double; "nan"/"inf" for
/// non-finite values.
std::string number(double value);

/// Strict decimal parse of a whole field; throws DataError naming `what`.
double parse_number(std::string_view text, std::string_view what);

}  // namespace instructmine::csv
