// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "instructmine/corpus.hpp"
#include "instructmine/json.hpp"

namespace instructmine::scoring {

/// Model-derived per-sample quantities, produced outside this process.
struct SampleScores {
    std::string id;
    double ppl = 1.0;  // exp of mean response-token NLL given the instruction
    double rew = 0.0;  // reward model score, unbounded
    double nat = 0.0;  // UniEval naturalness, [0, 1]
    double coh = 0.0;  // UniEval coherence, [0, 1]
    double und = 0.0;  // UniEval understandability, [0, 1]

    bool operator==(const SampleScores&) const = default;
};

/// Throws DataError naming the id when ppl < 1 or a UniEval score leaves [0, 1].
void validate(const SampleScores& scores);

using ScoreMap = std::map<std::string, SampleScores>;

/// Embeddings sharing one dimension, each with a strictly positive norm.
class EmbeddingSet {
public:
    void insert(const std::string& id, std::vector<double> vector);
    const std::vector<double>& at(const std::string& id) const;
    bool contains(const std::string& id) const { return vectors_.count(id) > 0; }
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return vectors_.size(); }
    bool empty() const { return vectors_.empty(); }
    const std::map<std::string, std::vector<double>>& vectors() const { return vectors_; }

    bool operator==(const EmbeddingSet&) const = default;

private:
    std::size_t dim_ = 0;
    std::map<std::string, std::vector<double>> vectors_;
};

// ---- sidecar files ------------------------------------------------------

ScoreMap parse_scores(std::string_view jsonl, const std::string& origin = "<scores>");
ScoreMap load_scores(const std::filesystem::path& path);
Json to_json(const SampleScores& scores);
/// Lines in the order of `ids`; every id must be present.
std::string serialize_scores(const ScoreMap& scores, std::span<const std::string> ids);

EmbeddingSet load_embeddings(const std::filesystem::path& path);
std::string serialize_embeddings(const EmbeddingSet& set, std::span<const std::string> ids);

/// Restricts a map to the corpus ids; throws DataError listing uncovered ids.
ScoreMap covering(const ScoreMap& scores, const corpus::Corpus& corpus);

// ---- wire protocol -------------------------------------------------------

inline constexpr std::string_view kScorePath = "/v1/score";
inline constexpr std::string_view kEmbedPath = "/v1/embed";
inline constexpr std::string_view kHealthPath = "/v1/health";
inline constexpr std::array<std::string_view, 5> kScoreFields{"ppl", "rew", "nat", "coh", "und"};

/// The service embeds instruction + kEmbedTextJoiner + response, and scores
/// PPL on the response tokens conditioned on the instruction. The instruction
/// sent on the wire already includes any optional input after a blank line.
inline constexpr std::string_view kEmbedTextJoiner = "\n\n";

Json score_request(std::span<const corpus::InstructionSample> batch);
Json embed_request(std::span<const corpus::InstructionSample> batch);

struct ClientOptions {
    std::string endpoint;  // e.g. "http://127.0.0.1:8000"
    std::size_t batch = 32;
    std::size_t parallelism = 4;
    std::size_t max_retries = 3;
    std::chrono::milliseconds retry_backoff{200};
    std::chrono::seconds timeout{120};
};

/// Endpoint from INSTRUCTMINE_ENDPOINT, or empty.
std::string default_endpoint();

/// Scores every sample through POST /v1/score. Transient failures (connection
/// errors, 408, 429, 5xx) are retried; anything else is fatal. Throws
/// DataError listing ids the service never returned.
ScoreMap fetch_scores(std::span<const corpus::InstructionSample> samples, const ClientOptions& options);

EmbeddingSet fetch_embeddings(std::span<const corpus::InstructionSample> samples,
                              const ClientOptions& options);

/// GET /v1/health body; throws ProtocolError unless status is "ok".
Json health(const ClientOptions& options);

}  // namespace instructmine::scoring
