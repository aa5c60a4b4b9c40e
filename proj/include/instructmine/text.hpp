// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace instructmine::text {

/// Decodes UTF-8; each invalid byte becomes U+FFFD so counts stay defined.
std::u32string decode_utf8(std::string_view bytes);

std::string encode_utf8(std::u32string_view codepoints);

/// Number of Unicode code points ("characters") in a UTF-8 string.
std::size_t char_count(std::string_view bytes);

bool is_space(char32_t c);

/// Strips leading and trailing whitespace (ASCII and Unicode spaces).
std::string_view trim(std::string_view s);

std::string lower_ascii(std::string_view s);

/// Splits on any whitespace, dropping empty pieces.
std::vector<std::string> split_whitespace(std::string_view s);

/// Instruction text used wherever one string is needed: the optional input is
/// appended after a blank line.
std::string join_instruction(std::string_view instruction, std::string_view input);

}  // namespace instructmine::text
