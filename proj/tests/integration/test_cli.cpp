// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "instructmine/cli.hpp"
#include "instructmine/csv.hpp"
#include "instructmine/rule.hpp"
#include "instructmine/study.hpp"
#include "fixtures.hpp"

using namespace instructmine;
using fixtures::read_text;
using fixtures::TempDir;
using fixtures::write_text;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "instructmine");
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string p(const fs::path& path) { return path.string(); }

/// Three candidate stores whose score distributions differ, plus one
/// combined score and embedding sidecar covering all of them.
struct StudyFixture {
    TempDir dir;
    std::vector<fixtures::Pool> pools;

    StudyFixture() {
        const std::vector<std::string> names{"alpha", "beta", "gamma"};
        scoring::ScoreMap all_scores;
        scoring::EmbeddingSet all_emb;
        std::vector<std::string> ids;
        for (std::size_t k = 0; k < names.size(); ++k) {
            auto pool = fixtures::synthetic_pool(names[k], 200, 100 + k);
            for (auto& [id, s] : pool.scores) {
                s.rew += static_cast<double>(k);
                s.ppl *= 1.0 + 0.5 * static_cast<double>(k);
            }
            write_text(dir / (names[k] + ".jsonl"), corpus::serialize_store(pool.corpus));
            for (const auto& id : pool.ids()) {
                ids.push_back(id);
                all_scores.emplace(id, pool.scores.at(id));
                all_emb.insert(id, pool.embeddings.at(id));
            }
            pools.push_back(std::move(pool));
        }
        write_text(dir / "scores.jsonl", scoring::serialize_scores(all_scores, ids));
        write_text(dir / "emb.jsonl", scoring::serialize_embeddings(all_emb, ids));
    }

    std::vector<std::string> corpus_args() const {
        std::vector<std::string> a;
        for (const auto& pool : pools) {
            a.push_back("--corpus");
            a.push_back(pool.corpus.name + "=" + p(dir / (pool.corpus.name + ".jsonl")));
        }
        return a;
    }

    /// Losses from the builtin rule on each fusion's indicators plus small noise.
    void write_losses(const fs::path& manifest_path, const fs::path& out) const {
        const auto manifest = sampling::StudyManifest::load(manifest_path);
        const auto corpora = study::load_corpora(manifest);
        const auto vectors = study::dataset_indicators(manifest, corpora, scoring::load_scores(dir / "scores.jsonl"),
                                                       scoring::load_embeddings(dir / "emb.jsonl"));
        const auto r = rule::QualityRule::builtin_eq4();
        std::string text = "label,loss\n";
        for (const auto& [label, v] : vectors) {
            Rng rng(derive_seed(0, "loss/" + label));
            const double loss = std::exp(rule::predict_log_loss(r, v).log_loss + 0.02 * rng.normal());
            text += label + "," + csv::number(loss) + "\n";
        }
        write_text(out, text);
    }
};

}  // namespace

TEST_CASE("usage errors exit 1") {
    CHECK(invoke({}).code == cli::kUsage);
    CHECK(invoke({"bogus"}).code == cli::kUsage);
    CHECK(invoke({"fit"}).code == cli::kUsage);
    CHECK(invoke({"report", "--observations", "x.csv", "--format", "png", "--out-dir", "o"}).code != cli::kOk);
    CHECK(invoke({"--help"}).code == cli::kOk);
}

TEST_CASE("missing input exits 2") {
    TempDir dir;
    const auto r = invoke({"fit", "--observations", p(dir / "none.csv"), "--out", p(dir / "fit.json")});
    CHECK(r.code == cli::kData);
    CHECK(r.err.find("none.csv") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "fit.json"));
}

TEST_CASE("ingest, score, indicators, tiers and select") {
    TempDir dir;
    std::string raw;
    Rng rng(5);
    for (int i = 0; i < 40; ++i) {
        Json rec{{"instruction", "Explain " + fixtures::random_text(rng, 4)},
                 {"input", ""},
                 {"output", fixtures::random_text(rng, 30 + i)}};
        raw += rec.dump() + "\n";
    }
    write_text(dir / "alpaca.raw.jsonl", raw);
    auto r = invoke({"--seed", "3", "ingest", "--source", "alpaca", "--input", p(dir / "alpaca.raw.jsonl"), "--output",
                  p(dir / "alpaca.jsonl"), "--cap", "30"});
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
    const auto store = corpus::read_store(dir / "alpaca.jsonl");
    CHECK(store.size() == 30);
    const Json run = Json::parse(read_text(dir / "alpaca.jsonl.run.json"));
    CHECK(run["command"] == "ingest");
    CHECK(run["seed"] == 3);

    // Same seed, same subset; refusing to overwrite.
    r = invoke({"--seed", "3", "ingest", "--source", "alpaca", "--input", p(dir / "alpaca.raw.jsonl"), "--output",
             p(dir / "alpaca.jsonl"), "--cap", "30"});
    CHECK(r.code == cli::kData);
    CHECK(r.err.find("overwrite") != std::string::npos);

    // Scores through the mock service and from a file agree.
    fixtures::MockScorer mock;
    r = invoke({"score", "--corpus", p(dir / "alpaca.jsonl"), "--endpoint", mock.endpoint(), "--out",
             p(dir / "s1.jsonl"), "--embeddings-out", p(dir / "e.jsonl"), "--batch", "7"});
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
    CHECK(mock.score_requests == 5);
    std::vector<std::string> ids;
    scoring::ScoreMap expected;
    for (const auto& s : store.samples) {
        ids.push_back(s.id);
        expected.emplace(s.id, fixtures::scores_for(s.id));
    }
    CHECK(read_text(dir / "s1.jsonl") == scoring::serialize_scores(expected, ids));
    CHECK(scoring::load_embeddings(dir / "e.jsonl").dim() == mock.dim);

    r = invoke({"score", "--corpus", p(dir / "alpaca.jsonl"), "--scores", p(dir / "s1.jsonl"), "--out",
             p(dir / "s2.jsonl")});
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
    CHECK(read_text(dir / "s2.jsonl") == read_text(dir / "s1.jsonl"));

    mock.omit.insert(ids[3]);
    r = invoke({"score", "--corpus", p(dir / "alpaca.jsonl"), "--endpoint", mock.endpoint(), "--out",
             p(dir / "s3.jsonl")});
    CHECK(r.code == cli::kData);
    CHECK(r.err.find(ids[3]) != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "s3.jsonl"));

    r = invoke({"indicators", "--corpus", p(dir / "alpaca.jsonl"), "--scores", p(dir / "s1.jsonl"), "--embeddings",
             p(dir / "e.jsonl"), "--out", p(dir / "ind.json")});
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
    const Json ind = Json::parse(read_text(dir / "ind.json"));
    CHECK(ind.dump().find("Knn6") != std::string::npos);

    r = invoke({"sample", "tiers", "--corpus", p(dir / "alpaca.jsonl"), "--indicator", "len", "--k", "3", "--size", "10",
             "--out-dir", p(dir / "tiers")});
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
    double previous = -1;
    for (int t = 1; t <= 3; ++t) {
        fs::path tier_file;
        for (const auto& e : fs::directory_iterator(dir / "tiers")) {
            if (e.path().filename().string().find("tier" + std::to_string(t)) != std::string::npos) tier_file = e.path();
        }
        REQUIRE(!tier_file.empty());
        const auto tier = corpus::read_store(tier_file);
        CHECK(tier.size() == 10);
        const double mean = indicators::length(tier).mean;
        CHECK(mean >= previous);
        previous = mean;
    }
    r = invoke({"sample", "tiers", "--corpus", p(dir / "alpaca.jsonl"), "--indicator", "len", "--k", "4", "--size", "10",
             "--out-dir", p(dir / "tiers2")});
    CHECK(r.code == cli::kData);

    r = invoke({"select", "--corpus", p(dir / "alpaca.jsonl"), "--scores", p(dir / "s1.jsonl"), "--embeddings",
             p(dir / "e.jsonl"), "--top", "5", "--out-dir", p(dir / "sel")});
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
    const Json sel = Json::parse(read_text(dir / "sel" / "selection.json"));
    CHECK(sel.dump().find("exp_rule") != std::string::npos);
    CHECK(corpus::read_store(dir / "sel" / "alpaca-top5.jsonl").size() == 5);
    CHECK(fs::exists(dir / "sel" / "run.json"));
    r = invoke({"select", "--corpus", p(dir / "alpaca.jsonl"), "--scores", p(dir / "s1.jsonl"), "--embeddings",
             p(dir / "e.jsonl"), "--top", "5", "--tiers", "2", "--out-dir", p(dir / "sel2")});
    CHECK(r.code == cli::kUsage);
}

TEST_CASE("manifest, fuse, study, fit, ks and report") {
    StudyFixture fx;
    const auto& dir = fx.dir;
    auto args = fx.corpus_args();
    args.insert(args.begin(), {"--seed", "0", "sample", "manifest"});
    for (const char* a : {"--fusions", "16", "--size", "150", "--out"}) args.emplace_back(a);
    args.push_back(p(dir / "manifest.json"));
    auto r = invoke(args);
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
    const auto manifest = sampling::StudyManifest::load(dir / "manifest.json");
    REQUIRE(manifest.specs.size() == 16);

    r = invoke({"sample", "fuse", "--manifest", p(dir / "manifest.json"), "--label", manifest.specs[0].label, "--out-dir",
             p(dir / "fused")});
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
    CHECK(corpus::read_store(dir / "fused" / (manifest.specs[0].label + ".jsonl")).size() == 150);
    CHECK(invoke({"sample", "fuse", "--manifest", p(dir / "manifest.json"), "--label", "nope", "--out-dir",
               p(dir / "fused2")})
              .code == cli::kData);

    fx.write_losses(dir / "manifest.json", dir / "losses.csv");
    const std::vector<std::string> study_base{"study", "--manifest", p(dir / "manifest.json"), "--losses",
                                              p(dir / "losses.csv"), "--scores", p(dir / "scores.jsonl"),
                                              "--embeddings", p(dir / "emb.jsonl")};
    auto study_args = study_base;
    for (const std::string& a : std::vector<std::string>{"--out", p(dir / "study1.json"), "--observations-out", p(dir / "obs.csv")}) {
        study_args.push_back(a);
    }
    r = invoke(study_args);
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
    const Json report = Json::parse(read_text(dir / "study1.json"));
    CHECK(report["n"] == 16);
    for (const char* key : {"describe", "ks", "ols", "stepwise", "rule"}) CHECK(report.contains(key));

    auto rerun = study_base;
    rerun.push_back("--out");
    rerun.push_back(p(dir / "study2.json"));
    REQUIRE(invoke(rerun).code == cli::kOk);
    CHECK(read_text(dir / "study1.json") == read_text(dir / "study2.json"));

    // A missing loss is named.
    write_text(dir / "short.csv", "label,loss\n" + manifest.specs[0].label + ",1.1\n");
    auto missing = study_base;
    missing[4] = p(dir / "short.csv");
    missing.push_back("--out");
    missing.push_back(p(dir / "study3.json"));
    r = invoke(missing);
    CHECK(r.code == cli::kData);
    CHECK(r.err.find(manifest.specs[1].label) != std::string::npos);

    r = invoke({"fit", "--observations", p(dir / "obs.csv"), "--stepwise", "--out", p(dir / "fit.json"), "--rule-out",
             p(dir / "rule.json")});
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
    const auto fitted = rule::QualityRule::load(dir / "rule.json");
    CHECK(fitted.provenance == rule::Provenance::fitted);
    r = invoke({"fit", "--observations", p(dir / "obs.csv"), "--variables", "rew,len,knn6", "--out", p(dir / "fit3.json")});
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
    CHECK(Json::parse(read_text(dir / "fit3.json")).dump().find("\"Rew\"") != std::string::npos);

    r = invoke({"ks", "--observations", p(dir / "obs.csv"), "--variables", "loss,rew", "--out", p(dir / "ks.json")});
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
    r = invoke({"ks", "--observations", p(dir / "obs.csv"), "--reference", "weird", "--out", p(dir / "ks2.json")});
    CHECK(r.code == cli::kUsage);

    r = invoke({"report", "--observations", p(dir / "obs.csv"), "--format", "both", "--out-dir", p(dir / "plots")});
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir / "plots")) files += e.is_regular_file();
    CHECK(files == 18);  // 8 csv, 8 svg, histograms.json, run.json

    r = invoke({"select", "--corpus", p(dir / "alpha.jsonl"), "--scores", p(dir / "scores.jsonl"), "--embeddings",
             p(dir / "emb.jsonl"), "--rule", p(dir / "rule.json"), "--tiers", "4", "--out-dir", p(dir / "ranked")});
    REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
    CHECK(corpus::read_store(dir / "ranked" / "alpha-tier4.jsonl").size() == 50);
}

TEST_CASE("a study smaller than the model is a data error") {
    StudyFixture fx;
    const auto& dir = fx.dir;
    auto args = fx.corpus_args();
    args.insert(args.begin(), {"sample", "manifest"});
    for (const char* a : {"--fusions", "1", "--size", "100", "--out"}) args.emplace_back(a);
    args.push_back(p(dir / "manifest.json"));
    REQUIRE(invoke(args).code == cli::kOk);
    fx.write_losses(dir / "manifest.json", dir / "losses.csv");
    const auto r = invoke({"study", "--manifest", p(dir / "manifest.json"), "--losses", p(dir / "losses.csv"), "--scores",
                        p(dir / "scores.jsonl"), "--embeddings", p(dir / "emb.jsonl"), "--out", p(dir / "s.json")});
    CHECK(r.code == cli::kData);
    CHECK_FALSE(fs::exists(dir / "s.json"));
}
