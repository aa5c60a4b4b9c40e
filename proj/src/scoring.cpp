// SPDX-License-Identifier: Apache-2.0
#include "instructmine/scoring.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include <httplib.h>

#include "instructmine/error.hpp"

namespace instructmine::scoring {

namespace {

double require_number(const Json& record, std::string_view key, const std::string& id) {
    auto it = record.find(std::string(key));
    if (it == record.end() || !it->is_number()) {
        throw DataError("scores for \"" + id + "\": missing numeric field \"" + std::string(key) + "\"");
    }
    return it->get<double>();
}

SampleScores scores_from_json(const Json& record) {
    if (!record.is_object()) throw DataError("score record is not an object");
    auto id = record.find("id");
    if (id == record.end() || !id->is_string()) throw DataError("score record without string \"id\"");
    SampleScores s;
    s.id = id->get<std::string>();
    s.ppl = require_number(record, "ppl", s.id);
    s.rew = require_number(record, "rew", s.id);
    s.nat = require_number(record, "nat", s.id);
    s.coh = require_number(record, "coh", s.id);
    s.und = require_number(record, "und", s.id);
    validate(s);
    return s;
}

std::vector<double> embedding_from_json(const Json& record, const std::string& id) {
    auto it = record.find("embedding");
    if (it == record.end() || !it->is_array()) {
        throw DataError("embedding for \"" + id + "\" is missing or not an array");
    }
    std::vector<double> v;
    v.reserve(it->size());
    for (const auto& x : *it) {
        if (!x.is_number()) throw DataError("embedding for \"" + id + "\" has a non-numeric entry");
        v.push_back(x.get<double>());
    }
    return v;
}

Json pairs_json(std::span<const corpus::InstructionSample> batch) {
    Json pairs = Json::array();
    for (const auto& s : batch) {
        Json pair;
        pair["id"] = s.id;
        pair["instruction"] = s.full_instruction();
        pair["response"] = s.response;
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

std::string list_ids(const std::vector<std::string>& ids) {
    std::string out;
    for (const auto& id : ids) out += (out.empty() ? "" : ", ") + id;
    return out;
}

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

// Sends `batches` requests with bounded concurrency and hands each decoded
// response body to `accept` (serialized under a lock).
void post_batches(std::span<const corpus::InstructionSample> samples, const ClientOptions& options,
                  std::string_view path,
                  const std::function<Json(std::span<const corpus::InstructionSample>)>& make_request,
                  const std::function<void(const Json&, std::span<const corpus::InstructionSample>)>& accept) {
    if (options.batch == 0) throw UsageError("scorer batch size must be at least 1");
    if (samples.empty()) return;
    if (options.endpoint.empty()) throw UsageError("no scorer endpoint configured");

    const std::size_t batches = (samples.size() + options.batch - 1) / options.batch;
    const std::size_t workers = std::max<std::size_t>(1, std::min(options.parallelism, batches));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex lock;
    std::exception_ptr failure;

    auto worker = [&] {
        httplib::Client client(options.endpoint);
        client.set_connection_timeout(options.timeout);
        client.set_read_timeout(options.timeout);
        client.set_write_timeout(options.timeout);
        while (!failed) {
            const std::size_t b = next++;
            if (b >= batches) return;
            const std::size_t begin = b * options.batch;
            const auto batch = samples.subspan(begin, std::min(options.batch, samples.size() - begin));
            try {
                const std::string body = make_request(batch).dump();
                std::optional<Json> decoded;
                std::string last_problem;
                for (std::size_t attempt = 0; attempt <= options.max_retries && !decoded; ++attempt) {
                    if (attempt > 0) std::this_thread::sleep_for(options.retry_backoff * attempt);
                    auto response = client.Post(std::string(path), body, "application/json");
                    if (!response) {
                        last_problem = "transport error: " + httplib::to_string(response.error());
                        continue;
                    }
                    if (transient_status(response->status)) {
                        last_problem = "HTTP " + std::to_string(response->status);
                        continue;
                    }
                    if (response->status != 200) {
                        throw ProtocolError(std::string(path) + " returned HTTP " +
                                            std::to_string(response->status) + ": " + response->body);
                    }
                    try {
                        decoded = Json::parse(response->body);
                    } catch (const Json::parse_error& e) {
                        throw ProtocolError(std::string(path) + " returned invalid JSON: " + e.what());
                    }
                }
                if (!decoded) {
                    throw ProtocolError(std::string(path) + " failed after " +
                                        std::to_string(options.max_retries + 1) + " attempts (" +
                                        last_problem + ")");
                }
                std::lock_guard guard(lock);
                accept(*decoded, batch);
            } catch (...) {
                std::lock_guard guard(lock);
                if (!failure) failure = std::current_exception();
                failed = true;
            }
        }
    };

    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

const Json& results_array(const Json& body, std::string_view path) {
    if (!body.is_object()) throw ProtocolError(std::string(path) + ": response is not an object");
    auto it = body.find("results");
    if (it == body.end() || !it->is_array()) {
        throw ProtocolError(std::string(path) + ": response has no \"results\" array");
    }
    return *it;
}

std::string result_id(const Json& result, std::string_view path,
                      std::span<const corpus::InstructionSample> batch) {
    if (!result.is_object() || !result.contains("id") || !result["id"].is_string()) {
        throw ProtocolError(std::string(path) + ": result without string id");
    }
    std::string id = result["id"].get<std::string>();
    bool requested = false;
    for (const auto& s : batch) requested = requested || s.id == id;
    if (!requested) throw ProtocolError(std::string(path) + ": unrequested id \"" + id + "\"");
    return id;
}

template <typename Covered>
void require_all(std::span<const corpus::InstructionSample> samples, const Covered& covered,
                 std::string_view what) {
    std::vector<std::string> missing;
    for (const auto& s : samples) {
        if (!covered(s.id)) missing.push_back(s.id);
    }
    if (!missing.empty()) {
        throw DataError(std::string(what) + ": service returned no result for " +
                        std::to_string(missing.size()) + " id(s): " + list_ids(missing));
    }
}

}  // namespace

void validate(const SampleScores& s) {
    auto bad = [&](const std::string& what) {
        throw DataError("scores for \"" + s.id + "\": " + what);
    };
    for (double v : {s.ppl, s.rew, s.nat, s.coh, s.und}) {
        if (!std::isfinite(v)) bad("non-finite value");
    }
    if (s.ppl < 1.0) bad("ppl " + std::to_string(s.ppl) + " is below 1");
    if (s.nat < 0.0 || s.nat > 1.0) bad("nat " + std::to_string(s.nat) + " outside [0, 1]");
    if (s.coh < 0.0 || s.coh > 1.0) bad("coh " + std::to_string(s.coh) + " outside [0, 1]");
    if (s.und < 0.0 || s.und > 1.0) bad("und " + std::to_string(s.und) + " outside [0, 1]");
}

void EmbeddingSet::insert(const std::string& id, std::vector<double> vector) {
    if (vector.empty()) throw DataError("embedding for \"" + id + "\" is empty");
    if (dim_ == 0 && vectors_.empty()) dim_ = vector.size();
    if (vector.size() != dim_) {
        throw DataError("embedding dimension mismatch for \"" + id + "\": " +
                        std::to_string(vector.size()) + " vs " + std::to_string(dim_));
    }
    double norm2 = 0.0;
    for (double x : vector) {
        if (!std::isfinite(x)) throw DataError("embedding for \"" + id + "\" has a non-finite entry");
        norm2 += x * x;
    }
    if (!(norm2 > 0.0)) throw DataError("embedding for \"" + id + "\" has zero norm");
    auto [it, inserted] = vectors_.emplace(id, std::move(vector));
    if (!inserted) throw DataError("duplicate embedding id \"" + id + "\"");
}

const std::vector<double>& EmbeddingSet::at(const std::string& id) const {
    auto it = vectors_.find(id);
    if (it == vectors_.end()) throw DataError("no embedding for \"" + id + "\"");
    return it->second;
}

ScoreMap parse_scores(std::string_view jsonl, const std::string& origin) {
    ScoreMap out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < jsonl.size()) {
        std::size_t end = jsonl.find('\n', pos);
        if (end == std::string_view::npos) end = jsonl.size();
        ++line_no;
        const std::string_view line = jsonl.substr(pos, end - pos);
        pos = end + 1;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        const std::string where = origin + ":" + std::to_string(line_no) + ": ";
        try {
            SampleScores s = scores_from_json(Json::parse(line));
            const std::string id = s.id;
            if (!out.emplace(id, std::move(s)).second) throw DataError("duplicate id \"" + id + "\"");
        } catch (const Json::parse_error& e) {
            throw DataError(where + e.what());
        } catch (const DataError& e) {
            throw DataError(where + e.what());
        }
    }
    return out;
}

ScoreMap load_scores(const std::filesystem::path& path) {
    return parse_scores(read_file(path), path.string());
}

Json to_json(const SampleScores& s) {
    Json out;
    out["id"] = s.id;
    out["ppl"] = s.ppl;
    out["rew"] = s.rew;
    out["nat"] = s.nat;
    out["coh"] = s.coh;
    out["und"] = s.und;
    return out;
}

std::string serialize_scores(const ScoreMap& scores, std::span<const std::string> ids) {
    std::string out;
    for (const auto& id : ids) {
        auto it = scores.find(id);
        if (it == scores.end()) throw DataError("no scores for \"" + id + "\"");
        out += to_line(to_json(it->second));
    }
    return out;
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
    EmbeddingSet set;
    for_each_record(path, [&](const RawRecord& record) {
        const std::string where = path.string() + ":" + std::to_string(record.line) + ": ";
        if (!record.error.empty()) throw DataError(where + record.error);
        try {
            if (!record.value.is_object() || !record.value.contains("id") ||
                !record.value["id"].is_string()) {
                throw DataError("embedding record without string \"id\"");
            }
            const std::string id = record.value["id"].get<std::string>();
            set.insert(id, embedding_from_json(record.value, id));
        } catch (const DataError& e) {
            throw DataError(where + e.what());
        }
    });
    return set;
}

std::string serialize_embeddings(const EmbeddingSet& set, std::span<const std::string> ids) {
    std::string out;
    for (const auto& id : ids) {
        Json line;
        line["id"] = id;
        line["embedding"] = set.at(id);
        out += to_line(line);
    }
    return out;
}

ScoreMap covering(const ScoreMap& scores, const corpus::Corpus& corpus) {
    ScoreMap out;
    std::vector<std::string> missing;
    for (const auto& s : corpus.samples) {
        auto it = scores.find(s.id);
        if (it == scores.end()) {
            missing.push_back(s.id);
        } else {
            out.emplace(s.id, it->second);
        }
    }
    if (!missing.empty()) {
        throw DataError("no scores for " + std::to_string(missing.size()) + " id(s): " + list_ids(missing));
    }
    return out;
}

Json score_request(std::span<const corpus::InstructionSample> batch) {
    Json request;
    request["pairs"] = pairs_json(batch);
    request["fields"] = Json::array();
    for (auto field : kScoreFields) request["fields"].push_back(std::string(field));
    return request;
}

Json embed_request(std::span<const corpus::InstructionSample> batch) {
    Json request;
    request["pairs"] = pairs_json(batch);
    return request;
}

std::string default_endpoint() {
    const char* value = std::getenv("INSTRUCTMINE_ENDPOINT");
    return value ? std::string(value) : std::string();
}

ScoreMap fetch_scores(std::span<const corpus::InstructionSample> samples, const ClientOptions& options) {
    ScoreMap out;
    post_batches(samples, options, kScorePath, score_request,
                 [&](const Json& body, std::span<const corpus::InstructionSample> batch) {
                     for (const auto& result : results_array(body, kScorePath)) {
                         result_id(result, kScorePath, batch);
                         SampleScores s = scores_from_json(result);
                         auto [it, inserted] = out.emplace(s.id, s);
                         if (!inserted && !(it->second == s)) {
                             throw ProtocolError("conflicting scores returned for \"" + s.id + "\"");
                         }
                     }
                 });
    require_all(samples, [&](const std::string& id) { return out.count(id) > 0; }, "score");
    return out;
}

EmbeddingSet fetch_embeddings(std::span<const corpus::InstructionSample> samples,
                              const ClientOptions& options) {
    EmbeddingSet out;
    post_batches(samples, options, kEmbedPath, embed_request,
                 [&](const Json& body, std::span<const corpus::InstructionSample> batch) {
                     const Json& results = results_array(body, kEmbedPath);
                     std::optional<std::size_t> declared;
                     if (body.contains("dim") && body["dim"].is_number_unsigned()) {
                         declared = body["dim"].get<std::size_t>();
                     }
                     for (const auto& result : results) {
                         const std::string id = result_id(result, kEmbedPath, batch);
                         std::vector<double> v = embedding_from_json(result, id);
                         if (declared && v.size() != *declared) {
                             throw DataError("embedding dimension mismatch for \"" + id + "\": " +
                                             std::to_string(v.size()) + " vs declared " +
                                             std::to_string(*declared));
                         }
                         if (out.contains(id)) {
                             if (out.at(id) != v) {
                                 throw ProtocolError("conflicting embeddings returned for \"" + id + "\"");
                             }
                             continue;
                         }
                         out.insert(id, std::move(v));
                     }
                 });
    require_all(samples, [&](const std::string& id) { return out.contains(id); }, "embed");
    return out;
}

Json health(const ClientOptions& options) {
    if (options.endpoint.empty()) throw UsageError("no scorer endpoint configured");
    httplib::Client client(options.endpoint);
    client.set_connection_timeout(options.timeout);
    client.set_read_timeout(options.timeout);
    auto response = client.Get(std::string(kHealthPath));
    if (!response) throw ProtocolError("health check failed: " + httplib::to_string(response.error()));
    if (response->status != 200) {
        throw ProtocolError("health check returned HTTP " + std::to_string(response->status));
    }
    Json body;
    try {
        body = Json::parse(response->body);
    } catch (const Json::parse_error& e) {
        throw ProtocolError(std::string("health check returned invalid JSON: ") + e.what());
    }
    if (!body.is_object() || body.value("status", "") != "ok") {
        throw ProtocolError("scorer reports unhealthy status: " + body.dump());
    }
    return body;
}

}  // namespace instructmine::scoring
