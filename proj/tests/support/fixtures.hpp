// SPDX-License-Identifier: Apache-2.0
// Shared helpers for the test binaries: temp directories, synthetic pools
// with sidecars, and an in-process mock of the scorer service.
#pragma once

#include <httplib.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "instructmine/corpus.hpp"
#include "instructmine/json.hpp"
#include "instructmine/rng.hpp"
#include "instructmine/scoring.hpp"

namespace fixtures {

namespace fs = std::filesystem;
using instructmine::Json;
using instructmine::Rng;

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        const auto tag = std::to_string(::getpid()) + "-" + std::to_string(counter++);
        path_ = fs::temp_directory_path() / ("instructmine-test-" + tag);
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << contents;
}

inline std::string read_text(const fs::path& path) { return instructmine::read_file(path); }

inline instructmine::corpus::InstructionSample sample(std::string id, std::string instruction, std::string response) {
    instructmine::corpus::InstructionSample s;
    s.id = std::move(id);
    s.instruction = std::move(instruction);
    s.response = std::move(response);
    s.source = instructmine::corpus::Source::custom;
    s.meta = Json::object();
    return s;
}

/// Words drawn from a 400-word vocabulary with a skewed distribution, so
/// texts have realistic repetition.
inline std::string random_text(Rng& rng, std::size_t words) {
    std::string out;
    for (std::size_t w = 0; w < words; ++w) {
        const double u = rng.unit();
        const auto rank = static_cast<std::size_t>(400.0 * u * u);
        if (!out.empty()) out.push_back(' ');
        out += "w" + std::to_string(rank);
    }
    return out;
}

inline std::vector<std::vector<double>> random_points(std::size_t n, std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
    for (auto& p : pts) {
        for (auto& x : p) x = rng.normal();
    }
    return pts;
}

/// Deterministic scores derived from the id alone, shared by the mock
/// service and file fixtures so both backends see identical values.
inline instructmine::scoring::SampleScores scores_for(const std::string& id) {
    Rng rng(instructmine::fnv1a64(id));
    instructmine::scoring::SampleScores s;
    s.id = id;
    s.ppl = 1.0 + 8.0 * rng.unit();
    s.rew = -1.0 + 3.0 * rng.unit();
    s.nat = rng.unit();
    s.coh = rng.unit();
    s.und = rng.unit();
    return s;
}

inline std::vector<double> embedding_for(const std::string& id, std::size_t dim) {
    Rng rng(instructmine::fnv1a64("embed:" + id));
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    return v;
}

struct Pool {
    instructmine::corpus::Corpus corpus;
    instructmine::scoring::ScoreMap scores;
    instructmine::scoring::EmbeddingSet embeddings;

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        for (const auto& s : corpus.samples) out.push_back(s.id);
        return out;
    }
};

inline Pool synthetic_pool(const std::string& name, std::size_t n, std::uint64_t seed, std::size_t dim = 16) {
    Pool pool;
    pool.corpus.name = name;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const std::string id = name + "-" + std::to_string(i);
        pool.corpus.samples.push_back(
            sample(id, "Task " + random_text(rng, 6), random_text(rng, 20 + rng.below(120))));
        pool.scores.emplace(id, scores_for(id));
        pool.embeddings.insert(id, embedding_for(id, dim));
    }
    return pool;
}

/// Writes store + score + embedding sidecars as <dir>/<name>{.jsonl,.scores.jsonl,.emb.jsonl}.
inline void write_pool(const Pool& pool, const fs::path& dir) {
    const auto ids = pool.ids();
    write_text(dir / (pool.corpus.name + ".jsonl"), instructmine::corpus::serialize_store(pool.corpus));
    write_text(dir / (pool.corpus.name + ".scores.jsonl"), instructmine::scoring::serialize_scores(pool.scores, ids));
    write_text(dir / (pool.corpus.name + ".emb.jsonl"),
               instructmine::scoring::serialize_embeddings(pool.embeddings, ids));
}

/// In-process scorer speaking the wire protocol on 127.0.0.1.
class MockScorer {
public:
    std::size_t dim = 8;
    std::set<std::string> omit;        // ids never returned
    std::atomic<int> fail_next{0};     // answer this many requests with 503
    std::atomic<int> score_requests{0};
    std::atomic<int> embed_requests{0};
    std::function<Json(const Json&)> score_override;  // replaces the score body when set
    std::function<Json(const Json&)> embed_override;

    MockScorer() {
        server_.Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
            ++score_requests;
            if (fail_next > 0) {
                --fail_next;
                res.status = 503;
                return;
            }
            const Json body = Json::parse(req.body);
            Json out;
            if (score_override) {
                out = score_override(body);
            } else {
                out["results"] = Json::array();
                for (const auto& p : body.at("pairs")) {
                    const auto id = p.at("id").get<std::string>();
                    if (omit.count(id)) continue;
                    out["results"].push_back(instructmine::scoring::to_json(scores_for(id)));
                }
            }
            res.set_content(out.dump(), "application/json");
        });
        server_.Post("/v1/embed", [this](const httplib::Request& req, httplib::Response& res) {
            ++embed_requests;
            const Json body = Json::parse(req.body);
            Json out;
            if (embed_override) {
                out = embed_override(body);
            } else {
                out["results"] = Json::array();
                for (const auto& p : body.at("pairs")) {
                    const auto id = p.at("id").get<std::string>();
                    if (omit.count(id)) continue;
                    out["results"].push_back({{"id", id}, {"embedding", embedding_for(id, dim)}});
                }
                out["dim"] = dim;
            }
            res.set_content(out.dump(), "application/json");
        });
        server_.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"status":"ok","models":{"mock":"1"}})", "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~MockScorer() {
        server_.stop();
        thread_.join();
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace fixtures
