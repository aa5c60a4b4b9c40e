// SPDX-License-Identifier: Apache-2.0
#include "instructmine/text.hpp"

namespace instructmine::text {

namespace {

// Decodes one code point starting at `pos`; advances `pos`.
char32_t next_codepoint(std::string_view s, std::size_t& pos) {
    const auto lead = static_cast<unsigned char>(s[pos]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (lead < 0x80) {
        ++pos;
        return lead;
    } else if ((lead & 0xE0) == 0xC0) {
        len = 2;
        cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
        len = 3;
        cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
        len = 4;
        cp = lead & 0x07;
    } else {
        ++pos;
        return 0xFFFD;
    }
    if (pos + len > s.size()) {
        ++pos;
        return 0xFFFD;
    }
    for (std::size_t k = 1; k < len; ++k) {
        const auto cont = static_cast<unsigned char>(s[pos + k]);
        if ((cont & 0xC0) != 0x80) {
            ++pos;
            return 0xFFFD;
        }
        cp = (cp << 6) | (cont & 0x3F);
    }
    pos += len;
    return cp;
}

}  // namespace

std::u32string decode_utf8(std::string_view bytes) {
    std::u32string out;
    out.reserve(bytes.size());
    std::size_t pos = 0;
    while (pos < bytes.size()) out.push_back(next_codepoint(bytes, pos));
    return out;
}

std::string encode_utf8(std::u32string_view codepoints) {
    std::string out;
    out.reserve(codepoints.size());
    for (char32_t c : codepoints) {
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
        } else if (c < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (c >> 6)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else if (c < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (c >> 12)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (c >> 18)));
            out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
        }
    }
    return out;
}

std::size_t char_count(std::string_view bytes) {
    std::size_t n = 0;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        next_codepoint(bytes, pos);
        ++n;
    }
    return n;
}

bool is_space(char32_t c) {
    return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
           (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
           c == 0x205F || c == 0x3000;
}

std::string_view trim(std::string_view s) {
    std::size_t pos = 0;
    std::size_t begin = s.size();
    std::size_t end = 0;
    while (pos < s.size()) {
        const std::size_t start = pos;
        if (!is_space(next_codepoint(s, pos))) {
            if (begin == s.size()) begin = start;
            end = pos;
        }
    }
    if (begin >= end) return s.substr(0, 0);
    return s.substr(begin, end - begin);
}

std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    std::size_t token_start = std::string_view::npos;
    while (pos < s.size()) {
        const std::size_t start = pos;
        const bool space = is_space(next_codepoint(s, pos));
        if (space && token_start != std::string_view::npos) {
            out.emplace_back(s.substr(token_start, start - token_start));
            token_start = std::string_view::npos;
        } else if (!space && token_start == std::string_view::npos) {
            token_start = start;
        }
    }
    if (token_start != std::string_view::npos) out.emplace_back(s.substr(token_start));
    return out;
}

std::string join_instruction(std::string_view instruction, std::string_view input) {
    std::string out(instruction);
    if (!input.empty()) {
        out += "\n\n";
        out += input;
    }
    return out;
}

}  // namespace instructmine::text
