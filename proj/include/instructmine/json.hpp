// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include <json.hpp>

namespace instructmine {

// Insertion-ordered so that every file we write has a fixed field order.
using Json = nlohmann::ordered_json;

/// One parsed input record and where it came from (1-based line for JSONL,
/// 1-based element index for a top-level JSON array).
struct RawRecord {
    std::size_t line = 0;
    Json value;
    std::string error;  // non-empty when the record failed to parse
};

/// Calls `visit` for each record of a JSONL file or a JSON array file. Blank
/// lines are skipped. An unreadable file throws DataError; a malformed record
/// is handed to `visit` with `error` set.
void for_each_record(const std::filesystem::path& path,
                     const std::function<void(const RawRecord&)>& visit);

/// Serializes `value` compactly followed by '\n'.
std::string to_line(const Json& value);

/// JSON number, or null for NaN/inf.
Json number_or_null(double value);

/// Reads a whole file; throws DataError when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes `contents` to a path that must not exist yet.
void write_new_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace instructmine
