// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "instructmine/error.hpp"
#include "instructmine/indicators.hpp"

using namespace instructmine;
using namespace instructmine::indicators;

namespace {

corpus::Corpus corpus_of(const std::vector<std::string>& responses) {
    corpus::Corpus c;
    c.name = "t";
    for (std::size_t i = 0; i < responses.size(); ++i) {
        c.samples.push_back(fixtures::sample("id" + std::to_string(i), "q", responses[i]));
    }
    return c;
}

// Brute-force i-th neighbour distance: all distances, sorted.
std::vector<double> brute_knn(const std::vector<std::vector<double>>& pts, std::size_t i, Metric metric) {
    std::vector<double> out;
    for (std::size_t a = 0; a < pts.size(); ++a) {
        std::vector<double> d;
        for (std::size_t b = 0; b < pts.size(); ++b) {
            if (a != b) d.push_back(distance(pts[a], pts[b], metric));
        }
        std::sort(d.begin(), d.end());
        out.push_back(d[i - 1]);
    }
    return out;
}

std::vector<std::string> ids_for(std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("p" + std::to_string(i));
    return ids;
}

}  // namespace

TEST_CASE("indicator names") {
    CHECK(name(Indicator::knn6) == "Knn6");
    CHECK(column(Indicator::ppl) == "ppl");
    CHECK(parse_indicator("KNN_6") == Indicator::knn6);
    CHECK(parse_indicator("Rew") == Indicator::rew);
    CHECK_THROWS_AS(parse_indicator("foo"), UsageError);
    IndicatorVector v;
    v[Indicator::len] = 3.5;
    v[Indicator::und] = 0.25;
    CHECK(IndicatorVector::from_json(v.to_json()).values == v.values);
}

TEST_CASE("length") {
    const auto r = length(corpus_of({"ab", "abcd"}));
    CHECK(r.values == std::vector<double>{2, 4});
    CHECK(r.mean == 3.0);
    CHECK(length(corpus_of({std::string(1000, 'z')})).mean == 1000.0);
    CHECK(length(corpus_of({"\xC3\xA9\xC3\xA9"})).mean == 2.0);
    CHECK_THROWS_AS(length(corpus_of({})), DataError);
}

TEST_CASE("mtld tokens") {
    CHECK(mtld_tokens("Hello, World! ... (ok)") == std::vector<std::string>{"hello", "world", "ok"});
    MtldOptions keep_case;
    keep_case.lowercase = false;
    CHECK(mtld_tokens("Hello hello", keep_case) == std::vector<std::string>{"Hello", "hello"});
}

TEST_CASE("mtld hand-computed fixtures") {
    // Values from an independent Python pass of the factor definition.
    CHECK(mtld("a b c d e f g h i a") == doctest::Approx(28.0).epsilon(1e-12));
    CHECK(mtld("a a a a a a a a a a") == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(mtld("The cat sat on the mat. The dog sat on the log!") == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(mtld("a b c d e f g h i j") == doctest::Approx(30.8).epsilon(1e-12));
    CHECK(mtld("one two three one two three four five six one two seven eight nine ten one") ==
          doctest::Approx(14.03921568627451).epsilon(1e-12));
    // Partial-factor formula pushes an all-distinct text above its length.
    CHECK(mtld("a b c d e f g h i j") > 10.0);
    CHECK(mtld("a b c d e f g h i j") > mtld("a a a a a a a a a a"));
    CHECK(mtld("A B C a b c") == mtld("a b c a b c"));
    CHECK_THROWS_AS(mtld("... !!"), DataError);
    CHECK_THROWS_AS(mtld(corpus_of({"fine text", "?!"})), DataError);
}

TEST_CASE("distance metrics") {
    const std::vector<double> a{1, 2, 3};
    const std::vector<double> b{-2, 0.5, 4};
    const double cos = (1 * -2 + 2 * 0.5 + 3 * 4) / std::sqrt(14.0 * 20.25);
    CHECK(distance(a, b, Metric::cosine) == doctest::Approx(1 - cos).epsilon(1e-14));
    CHECK(distance(a, b, Metric::euclidean) == doctest::Approx(std::sqrt(9 + 2.25 + 1)).epsilon(1e-14));
    CHECK(distance(a, a, Metric::cosine) == 0.0);
    const std::vector<double> a2{2, 4, 6};
    CHECK(distance(a, a2, Metric::cosine) == 0.0);
}

TEST_CASE("knn on a circle") {
    std::vector<std::vector<double>> pts;
    for (int k = 0; k < 8; ++k) {
        const double t = k * std::numbers::pi / 4;
        pts.push_back({std::cos(t), std::sin(t)});
    }
    KnnOptions o;
    o.i = 1;
    o.metric = Metric::euclidean;
    const auto r = knn_i(ids_for(8), pts, o);
    for (double v : r.values.values) CHECK(v == doctest::Approx(2 * std::sin(std::numbers::pi / 8)).epsilon(1e-12));
    o.metric = Metric::cosine;
    for (double v : knn_i(ids_for(8), pts, o).values.values) {
        CHECK(v == doctest::Approx(1 - std::cos(std::numbers::pi / 4)).epsilon(1e-12));
    }
    o.i = 2;
    o.reduce = KnnReduce::mean_first;
    for (double v : knn_i(ids_for(8), pts, o).values.values) {
        CHECK(v == doctest::Approx(1 - std::cos(std::numbers::pi / 4)).epsilon(1e-12));
    }
    o.i = 8;
    CHECK_THROWS_AS(knn_i(ids_for(8), pts, o), DataError);
}

TEST_CASE("exact knn equals brute force and ignores order") {
    const auto pts = fixtures::random_points(300, 12, 5);
    for (Metric m : {Metric::cosine, Metric::euclidean}) {
        KnnOptions o;
        o.metric = m;
        const auto r = knn_i(ids_for(pts.size()), pts, o);
        CHECK(r.values.values == brute_knn(pts, 6, m));
        CHECK_FALSE(r.estimated_recall.has_value());
    }
    std::vector<std::size_t> perm(pts.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(9);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    std::vector<std::vector<double>> shuffled;
    for (auto p : perm) shuffled.push_back(pts[p]);
    const auto base = knn_i(ids_for(pts.size()), pts).values.values;
    const auto moved = knn_i(ids_for(pts.size()), shuffled).values.values;
    for (std::size_t k = 0; k < perm.size(); ++k) CHECK(moved[k] == base[perm[k]]);
}

TEST_CASE("duplicating every sample never raises knn6") {
    const auto pts = fixtures::random_points(120, 8, 6);
    auto doubled = pts;
    doubled.insert(doubled.end(), pts.begin(), pts.end());
    const double before = knn_i(ids_for(pts.size()), pts).values.mean;
    const double after = knn_i(ids_for(doubled.size()), doubled).values.mean;
    CHECK(after <= before);
}

TEST_CASE("nn-descent recall") {
    const auto pts = fixtures::random_points(600, 16, 7);
    const auto exact = exact_neighbors(pts, 6, Metric::cosine);
    NnDescentOptions d;
    d.seed = 3;
    const auto approx = nn_descent(pts, 6, Metric::cosine, d);
    CHECK(recall_at(approx, exact, 6) >= 0.95);
    CHECK(recall_at(exact, exact, 6) == 1.0);
    KnnOptions o;
    o.mode = KnnMode::approximate;
    o.descent.seed = 3;
    const auto r = knn_i(ids_for(pts.size()), pts, o);
    REQUIRE(r.estimated_recall.has_value());
    CHECK(*r.estimated_recall >= 0.9);
    // Same seed, same graph.
    CHECK(knn_i(ids_for(pts.size()), pts, o).values.values == r.values.values);
}

TEST_CASE("aggregate is the mean of per-sample values") {
    const auto pool = fixtures::synthetic_pool("agg", 80, 12);
    const auto report = aggregate(pool.corpus, pool.scores, pool.embeddings);
    for (Indicator i : kAllIndicators) {
        const auto& v = report.values(i);
        REQUIRE(v.size() == 80);
        long double sum = 0;
        for (double x : v) sum += x;
        CHECK(report.dataset[i] == doctest::Approx(static_cast<double>(sum / 80)).epsilon(1e-12));
    }
    CHECK(report.values(Indicator::rew)[3] == pool.scores.at(pool.corpus.samples[3].id).rew);
    const Json j = report.to_json();
    CHECK(j["knn"]["metric"] == "cosine");
    CHECK(j["per_sample"]["knn6"].size() == 80);
}

TEST_CASE("aggregate errors") {
    auto pool = fixtures::synthetic_pool("err", 10, 13);
    const std::string victim = pool.corpus.samples[4].id;
    pool.scores.erase(victim);
    try {
        aggregate(pool.corpus, pool.scores, pool.embeddings);
        FAIL("expected uncovered id");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(victim) != std::string::npos);
    }
    auto one = fixtures::synthetic_pool("one", 1, 14);
    CHECK_THROWS_AS(aggregate(one.corpus, one.scores, one.embeddings), DataError);
}

TEST_CASE("pool scope measures neighbours against every embedding") {
    const auto pool = fixtures::synthetic_pool("scope", 60, 15);
    corpus::Corpus subset;
    subset.name = "sub";
    subset.samples.assign(pool.corpus.samples.begin(), pool.corpus.samples.begin() + 20);
    AggregateOptions o;
    o.scope = KnnScope::pool;
    const auto in_pool = aggregate(subset, pool.scores, pool.embeddings, o);
    const auto whole = aggregate(pool.corpus, pool.scores, pool.embeddings);
    for (std::size_t k = 0; k < 20; ++k) {
        CHECK(in_pool.values(Indicator::knn6)[k] == whole.values(Indicator::knn6)[k]);
    }
}
