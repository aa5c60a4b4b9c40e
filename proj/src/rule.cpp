// SPDX-License-Identifier: Apache-2.0
#include "instructmine/rule.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "instructmine/error.hpp"
#include "instructmine/rng.hpp"

namespace instructmine::rule {

using indicators::Indicator;

QualityRule QualityRule::builtin_eq4() {
    QualityRule r;
    r.intercept = 1.0694;
    r.terms = {{Indicator::len, 8.257e-5}, {Indicator::rew, -0.1498}, {Indicator::knn6, -0.9350}};
    r.provenance = Provenance::builtin_eq4;
    return r;
}

Json QualityRule::to_json() const {
    Json out;
    out["intercept"] = intercept;
    Json t = Json::object();
    for (const auto& [ind, coef] : terms) t[std::string(indicators::name(ind))] = coef;
    out["terms"] = std::move(t);
    out["provenance"] = provenance == Provenance::builtin_eq4 ? std::string("builtin_eq4") : "fitted:" + reference;
    return out;
}

QualityRule QualityRule::from_json(const Json& value) {
    QualityRule r;
    try {
        r.intercept = value.at("intercept").get<double>();
        for (const auto& [name, coef] : value.at("terms").items()) {
            const Indicator ind = indicators::parse_indicator(name);
            if (!r.terms.emplace(ind, coef.get<double>()).second) {
                throw DataError("rule: term \"" + name + "\" given twice");
            }
        }
        const auto prov = value.at("provenance").get<std::string>();
        if (prov == "builtin_eq4") {
            r.provenance = Provenance::builtin_eq4;
        } else if (prov.rfind("fitted:", 0) == 0 && prov.size() > 7) {
            r.provenance = Provenance::fitted;
            r.reference = prov.substr(7);
        } else {
            throw DataError("rule: provenance must be \"builtin_eq4\" or \"fitted:<fingerprint>\"");
        }
    } catch (const Json::exception& e) {
        throw DataError(std::string("rule: ") + e.what());
    } catch (const UsageError& e) {
        throw DataError(std::string("rule: ") + e.what());
    }
    if (!std::isfinite(r.intercept)) throw DataError("rule: non-finite intercept");
    for (const auto& [ind, coef] : r.terms) {
        if (!std::isfinite(coef)) throw DataError("rule: non-finite coefficient for " + std::string(indicators::name(ind)));
    }
    return r;
}

QualityRule QualityRule::load(const std::filesystem::path& path) {
    try {
        return from_json(Json::parse(read_file(path)));
    } catch (const Json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string fingerprint(const Json& report) {
    char buffer[17];
    std::snprintf(buffer, sizeof buffer, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(report.dump())));
    return buffer;
}

QualityRule from_fit(const stats::RegressionFit& fit) {
    QualityRule r;
    r.provenance = Provenance::fitted;
    r.reference = fingerprint(fit.to_json(true));
    for (std::size_t j = 0; j < fit.variables.size(); ++j) {
        if (fit.variables[j] == stats::kInterceptName) {
            r.intercept = fit.coefficients[j];
            continue;
        }
        try {
            r.terms[indicators::parse_indicator(fit.variables[j])] = fit.coefficients[j];
        } catch (const UsageError&) {
            throw DataError("rule: fitted variable \"" + fit.variables[j] + "\" is not an indicator");
        }
    }
    return r;
}

Prediction predict_log_loss(const QualityRule& rule, const indicators::IndicatorVector& values) {
    double sum = rule.intercept;
    for (const auto& [ind, coef] : rule.terms) sum += coef * values[ind];
    return {sum, std::exp(sum)};
}

Prediction predict_log_loss(const QualityRule& rule, const std::map<Indicator, double>& values) {
    double sum = rule.intercept;
    for (const auto& [ind, coef] : rule.terms) {
        auto it = values.find(ind);
        if (it == values.end()) throw DataError("rule term " + std::string(indicators::name(ind)) + " has no value");
        sum += coef * it->second;
    }
    return {sum, std::exp(sum)};
}

std::vector<RankedSample> order_by_prediction(std::span<const std::string> ids, std::span<const double> log_loss) {
    if (ids.size() != log_loss.size()) throw UsageError("rank: ids and predictions differ in length");
    std::vector<RankedSample> out;
    out.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) out.push_back({i, ids[i], log_loss[i]});
    std::sort(out.begin(), out.end(), [](const RankedSample& a, const RankedSample& b) {
        if (a.log_loss != b.log_loss) return a.log_loss < b.log_loss;
        return a.id < b.id;
    });
    return out;
}

Ranking rank_samples(const QualityRule& rule, const corpus::Corpus& pool, const scoring::ScoreMap& scores,
                     const scoring::EmbeddingSet& embeddings, const indicators::AggregateOptions& options) {
    const std::size_t need = options.knn.i + 1;
    if (pool.size() < need) {
        throw DataError("rank: pool \"" + pool.name + "\" has " + std::to_string(pool.size()) +
                        " samples; Knn" + std::to_string(options.knn.i) + " needs at least " + std::to_string(need));
    }
    Ranking ranking;
    indicators::AggregateOptions opts = options;
    opts.scope = indicators::KnnScope::dataset;
    ranking.values = indicators::aggregate(pool, scores, embeddings, opts);

    std::vector<double> predictions(pool.size(), rule.intercept);
    for (const auto& [ind, coef] : rule.terms) {
        const auto& column = ranking.values.values(ind);
        for (std::size_t i = 0; i < predictions.size(); ++i) predictions[i] += coef * column[i];
    }
    ranking.order = order_by_prediction(ranking.values.ids, predictions);
    return ranking;
}

namespace {

Selection band(const QualityRule& rule, const corpus::Corpus& pool, const Ranking& ranking, std::size_t first,
               std::size_t count, std::string name) {
    Selection s;
    s.corpus.name = std::move(name);
    s.first_rank = first;
    std::array<double, 8> sums{};
    for (std::size_t r = first; r < first + count; ++r) {
        const std::size_t idx = ranking.order[r].index;
        s.corpus.samples.push_back(pool.samples[idx]);
        for (std::size_t k = 0; k < 8; ++k) sums[k] += ranking.values.per_sample[k][idx];
    }
    for (std::size_t k = 0; k < 8; ++k) s.indicators.values[k] = sums[k] / static_cast<double>(count);
    s.rule = predict_log_loss(rule, s.indicators);
    return s;
}

void check_ranking(const corpus::Corpus& pool, const Ranking& ranking) {
    if (ranking.order.size() != pool.size()) throw UsageError("select: ranking does not belong to this pool");
}

}  // namespace

Json Selection::to_json() const {
    Json out;
    out["name"] = corpus.name;
    out["size"] = corpus.size();
    out["first_rank"] = first_rank;
    out["indicators"] = indicators.to_json();
    out["rule"] = number_or_null(rule.log_loss);
    out["exp_rule"] = number_or_null(rule.loss);
    return out;
}

Selection select_top(const QualityRule& rule, const corpus::Corpus& pool, const Ranking& ranking, std::size_t n) {
    check_ranking(pool, ranking);
    if (n == 0) throw UsageError("select: n must be at least 1");
    if (n > pool.size()) {
        throw DataError("select: top " + std::to_string(n) + " requested from a pool of " +
                        std::to_string(pool.size()));
    }
    return band(rule, pool, ranking, 0, n, pool.name + "-top" + std::to_string(n));
}

std::vector<Selection> select_tiers(const QualityRule& rule, const corpus::Corpus& pool, const Ranking& ranking,
                                    std::size_t tiers, std::size_t band_size) {
    check_ranking(pool, ranking);
    if (tiers == 0 || band_size == 0) throw UsageError("select: tiers and tier size must be at least 1");
    if (tiers * band_size > pool.size()) {
        throw DataError("select: " + std::to_string(tiers) + " tiers of " + std::to_string(band_size) +
                        " exceed a pool of " + std::to_string(pool.size()));
    }
    std::vector<Selection> out;
    for (std::size_t t = 0; t < tiers; ++t) {
        out.push_back(band(rule, pool, ranking, t * band_size, band_size, pool.name + "-tier" + std::to_string(t + 1)));
    }
    return out;
}

}  // namespace instructmine::rule
