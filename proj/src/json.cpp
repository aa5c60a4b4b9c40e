// SPDX-License-Identifier: Apache-2.0
#include "instructmine/json.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "instructmine/error.hpp"

namespace instructmine {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw DataError("read failed for " + path.string());
    return buffer.str();
}

void write_new_file(const std::filesystem::path& path, const std::string& contents) {
    if (std::filesystem::exists(path)) {
        throw DataError("refusing to overwrite existing output " + path.string());
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot create " + path.string());
    out << contents;
    if (!out.flush()) throw DataError("write failed for " + path.string());
}

std::string to_line(const Json& value) {
    std::string line = value.dump(-1, ' ', false, Json::error_handler_t::strict);
    line.push_back('\n');
    return line;
}

Json number_or_null(double value) {
    if (!std::isfinite(value)) return nullptr;
    return value;
}

void for_each_record(const std::filesystem::path& path,
                     const std::function<void(const RawRecord&)>& visit) {
    const std::string contents = read_file(path);
    std::size_t first = contents.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return;

    if (contents[first] == '[') {
        Json array;
        try {
            array = Json::parse(contents);
        } catch (const Json::parse_error& e) {
            throw DataError(path.string() + ": not a valid JSON array: " + e.what());
        }
        std::size_t index = 0;
        for (auto& element : array) {
            RawRecord record;
            record.line = ++index;
            record.value = std::move(element);
            visit(record);
        }
        return;
    }

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= contents.size()) {
        std::size_t end = contents.find('\n', pos);
        if (end == std::string::npos) end = contents.size();
        ++line_no;
        std::string_view line(contents.data() + pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") != std::string_view::npos) {
            RawRecord record;
            record.line = line_no;
            try {
                record.value = Json::parse(line);
            } catch (const Json::parse_error& e) {
                record.error = e.what();
            }
            visit(record);
        }
        if (end == contents.size()) break;
        pos = end + 1;
    }
}

}  // namespace instructmine
