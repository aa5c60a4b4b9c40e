// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "instructmine/corpus.hpp"
#include "instructmine/indicators.hpp"
#include "instructmine/json.hpp"
#include "instructmine/scoring.hpp"
#include "instructmine/stats.hpp"

namespace instructmine::rule {

enum class Provenance { builtin_eq4, fitted };

/// Linear predictor of log evaluation loss from dataset indicators.
struct QualityRule {
    double intercept = 0.0;
    std::map<indicators::Indicator, double> terms;
    Provenance provenance = Provenance::fitted;
    std::string reference;  // fingerprint of the fit report for fitted rules

    /// The published rule: 1.0694 - 0.1498 Rew + 8.257e-5 Len - 0.9350 Knn6.
    static QualityRule builtin_eq4();

    /// {intercept, terms: {Name: coef}, provenance}; provenance is
    /// "builtin_eq4" or "fitted:<fingerprint>".
    Json to_json() const;
    static QualityRule from_json(const Json& value);
    static QualityRule load(const std::filesystem::path& path);
};

/// Rule from a fitted regression: "const" becomes the intercept and every
/// other variable must name an indicator. The provenance fingerprint is the
/// FNV-1a 64 hash of the fit's serialized report.
QualityRule from_fit(const stats::RegressionFit& fit);

std::string fingerprint(const Json& report);

struct Prediction {
    double log_loss;
    double loss;  // exp(log_loss)
};

Prediction predict_log_loss(const QualityRule& rule, const indicators::IndicatorVector& values);

/// Partial input; every rule term must be present or a DataError names it.
Prediction predict_log_loss(const QualityRule& rule, const std::map<indicators::Indicator, double>& values);

struct RankedSample {
    std::size_t index;  // position in the pool
    std::string id;
    double log_loss;
};

struct Ranking {
    std::vector<RankedSample> order;  // ascending predicted log-loss, ties by id
    indicators::IndicatorReport values;
};

/// Per-sample predictions over the pool: Len is the response length and
/// Knn6 is measured against the whole pool. Throws DataError when the pool
/// is too small for the neighbour count.
Ranking rank_samples(const QualityRule& rule, const corpus::Corpus& pool, const scoring::ScoreMap& scores,
                     const scoring::EmbeddingSet& embeddings, const indicators::AggregateOptions& options = {});

/// Ranks given per-sample predictions; exposed for callers with their own values.
std::vector<RankedSample> order_by_prediction(std::span<const std::string> ids, std::span<const double> log_loss);

struct Selection {
    corpus::Corpus corpus;
    std::size_t first_rank = 0;  // 0-based rank of the first member
    indicators::IndicatorVector indicators;
    Prediction rule;

    Json to_json() const;
};

/// The n best-ranked samples.
Selection select_top(const QualityRule& rule, const corpus::Corpus& pool, const Ranking& ranking, std::size_t n);

/// `tiers` disjoint contiguous rank bands of `band_size` samples each,
/// best band first.
std::vector<Selection> select_tiers(const QualityRule& rule, const corpus::Corpus& pool, const Ranking& ranking,
                                    std::size_t tiers, std::size_t band_size);

}  // namespace instructmine::rule
