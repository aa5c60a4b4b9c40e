// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "instructmine/json.hpp"

namespace instructmine::corpus {

enum class Source { alpaca, open_assistant, stack_exchange, wikihow, dolly, custom };

std::string_view to_string(Source source);
/// Accepts the store spelling ("open_assistant") and a dashed CLI spelling.
Source parse_source(std::string_view name);

struct InstructionSample {
    std::string id;
    std::string instruction;
    std::optional<std::string> input;
    std::string response;
    Source source = Source::custom;
    Json meta = Json::object();  // scalar values only (votes, exchange, language, ...)

    /// Instruction plus optional input, as a single prompt string.
    std::string full_instruction() const;
};

struct Corpus {
    std::string name;
    std::vector<InstructionSample> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    /// Index of each id; throws DataError on duplicates.
    std::unordered_map<std::string, std::size_t> index() const;
};

struct RecordError {
    std::size_t line = 0;
    std::string message;
};

/// What happened to every input record of one ingest pass.
struct IngestReport {
    std::size_t records = 0;
    std::size_t retained = 0;
    std::map<std::string, std::size_t> dropped;  // reason -> count
    std::vector<RecordError> errors;
    std::vector<std::string> warnings;

    void drop(const std::string& reason) { ++dropped[reason]; }
    std::size_t dropped_total() const;
    Json to_json() const;
};

struct IngestResult {
    Corpus corpus;
    IngestReport report;
};

// Defaults follow the candidate-pool construction used for the study.
inline constexpr std::size_t kAlpacaCap = 2000;
inline constexpr std::int64_t kStackExchangeMinVotes = 6;
inline constexpr std::size_t kStackExchangeMinChars = 200;
inline constexpr std::size_t kStackExchangeMaxChars = 4000;
inline constexpr std::size_t kStackExchangePerExchange = 20;
inline constexpr std::size_t kWikihowClusters = 19;
inline constexpr std::size_t kWikihowTarget = 2000;
inline constexpr std::string_view kHumanMarker = "### Human: ";
inline constexpr std::string_view kAssistantMarker = "### Assistant: ";

/// Uniform seeded subset of at most `cap` records, kept in file order.
IngestResult ingest_alpaca(const std::filesystem::path& path, std::size_t cap = kAlpacaCap,
                           std::uint64_t seed = 0);

/// Returns true when the text should be treated as English.
using LanguageDetector = std::function<bool(std::string_view)>;

/// Default detector. A text is English when at least 85% of its letters are
/// ASCII and, for texts of 5+ tokens, at least 8% of tokens are common English
/// function words.
bool looks_english(std::string_view text);

IngestResult ingest_open_assistant(const std::filesystem::path& path,
                                   const LanguageDetector& is_english = looks_english);

struct StackExchangeOptions {
    std::int64_t min_votes = kStackExchangeMinVotes;
    std::size_t min_chars = kStackExchangeMinChars;
    std::size_t max_chars = kStackExchangeMaxChars;
    std::size_t per_exchange = kStackExchangePerExchange;
};

IngestResult ingest_stack_exchange(const std::filesystem::path& path,
                                   const StackExchangeOptions& options = {});

/// id -> embedding vector, as read from an embedding sidecar.
using EmbeddingLookup = std::unordered_map<std::string, std::vector<double>>;

struct WikihowOptions {
    std::size_t clusters = kWikihowClusters;
    std::size_t target = kWikihowTarget;
    std::uint64_t seed = 0;
};

/// Cluster-balanced draw over title embeddings. Throws DataError listing every
/// sample id that has no embedding.
IngestResult ingest_wikihow(const std::filesystem::path& path, const EmbeddingLookup& embeddings,
                            const WikihowOptions& options = {});

IngestResult ingest_dolly(const std::filesystem::path& path);

/// Sample ids a raw file would produce, in file order, without filtering.
/// Lets embedding sidecars be prepared before wikihow ingestion.
std::vector<std::string> raw_ids(const std::filesystem::path& path, Source source);

// ---- normalized store --------------------------------------------------

Json to_json(const InstructionSample& sample);
InstructionSample sample_from_json(const Json& value);

/// One JSON object per line with fields id, instruction, input, response,
/// source, meta in that order.
std::string serialize_store(const Corpus& corpus);
void write_store(const Corpus& corpus, const std::filesystem::path& path);
Corpus read_store(const std::filesystem::path& path);

// ---- preprocessing primitives -----------------------------------------

/// Removes tags from a fixed HTML tag list (plus comments) and decodes
/// &amp; &lt; &gt; &quot; &#39; &apos;. Unknown angle-bracket text is kept.
std::string strip_html(std::string_view html);

/// True when the text contains an opening, closing or self-closing tag whose
/// name is on the stripped-tag list.
bool contains_html_tag(std::string_view text);

}  // namespace instructmine::corpus
