// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "instructmine/indicators.hpp"
#include "instructmine/json.hpp"
#include "instructmine/sampling.hpp"
#include "instructmine/scoring.hpp"
#include "instructmine/stats.hpp"

namespace instructmine::study {

using LossMap = std::map<std::string, double>;

/// CSV with header label,loss. Duplicate labels and non-positive losses are
/// DataErrors.
LossMap parse_losses(const std::string& csv, const std::string& source = "losses");
LossMap read_losses(const std::filesystem::path& path);

struct StudyOptions {
    indicators::AggregateOptions indicators{};
    double alpha = 0.05;
    bool log_target = true;
};

/// Loads every corpus named by the manifest from its store file.
std::map<std::string, corpus::Corpus> load_corpora(const sampling::StudyManifest& manifest);

/// Fuses each spec and computes its dataset indicator vector, in manifest order.
std::vector<std::pair<std::string, indicators::IndicatorVector>> dataset_indicators(
    const sampling::StudyManifest& manifest, const std::map<std::string, corpus::Corpus>& corpora,
    const scoring::ScoreMap& scores, const scoring::EmbeddingSet& embeddings,
    const indicators::AggregateOptions& options = {});

struct StudyResult {
    std::vector<stats::Observation> observations;
    std::vector<std::pair<std::string, stats::Summary>> summary;
    std::vector<stats::KsResult> ks;
    std::vector<std::pair<std::string, std::string>> ks_errors;  // variable, reason
    stats::StepwiseFit fit;
    Json report;
};

/// fuse, indicators, observations, describe, KS per variable, OLS and
/// backward stepwise, gathered into one report. Every manifest label must
/// have a loss; a DataError lists those that do not.
StudyResult run_study(const sampling::StudyManifest& manifest, const std::map<std::string, corpus::Corpus>& corpora,
                      const LossMap& losses, const scoring::ScoreMap& scores,
                      const scoring::EmbeddingSet& embeddings, const StudyOptions& options = {});

}  // namespace instructmine::study
