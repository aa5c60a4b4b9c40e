// SPDX-License-Identifier: Apache-2.0
#include "instructmine/study.hpp"

#include <cmath>

#include "instructmine/csv.hpp"
#include "instructmine/error.hpp"
#include "instructmine/rule.hpp"
#include "instructmine/text.hpp"

namespace instructmine::study {

LossMap parse_losses(const std::string& contents, const std::string& source) {
    const auto rows = csv::parse(contents, source);
    if (rows.empty()) throw DataError(source + ": no header");
    const auto& header = rows.front();
    if (header.size() != 2 || text::trim(header[0]) != "label" || text::trim(header[1]) != "loss") {
        throw DataError(source + ": header must be label,loss");
    }
    LossMap out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const std::string where = source + " row " + std::to_string(r);
        if (rows[r].size() != 2) throw DataError(where + ": expected 2 fields");
        const std::string label(text::trim(rows[r][0]));
        const double loss = csv::parse_number(rows[r][1], where + " loss");
        if (!(loss > 0.0) || !std::isfinite(loss)) throw DataError(where + ": loss must be positive and finite");
        if (!out.emplace(label, loss).second) throw DataError(where + ": duplicate label \"" + label + "\"");
    }
    return out;
}

LossMap read_losses(const std::filesystem::path& path) { return parse_losses(read_file(path), path.string()); }

std::map<std::string, corpus::Corpus> load_corpora(const sampling::StudyManifest& manifest) {
    std::map<std::string, corpus::Corpus> out;
    for (const auto& [name, path] : manifest.corpora) {
        corpus::Corpus c = corpus::read_store(path);
        c.name = name;
        if (!out.emplace(name, std::move(c)).second) throw DataError("manifest names corpus \"" + name + "\" twice");
    }
    return out;
}

std::vector<std::pair<std::string, indicators::IndicatorVector>> dataset_indicators(
    const sampling::StudyManifest& manifest, const std::map<std::string, corpus::Corpus>& corpora,
    const scoring::ScoreMap& scores, const scoring::EmbeddingSet& embeddings,
    const indicators::AggregateOptions& options) {
    std::vector<std::pair<std::string, indicators::IndicatorVector>> out;
    for (const auto& spec : manifest.specs) {
        const auto fused = sampling::fuse(spec, corpora);
        try {
            out.emplace_back(spec.label, indicators::aggregate(fused.corpus, scores, embeddings, options).dataset);
        } catch (const DataError& e) {
            throw DataError(spec.label + ": " + e.what());
        }
    }
    return out;
}

StudyResult run_study(const sampling::StudyManifest& manifest, const std::map<std::string, corpus::Corpus>& corpora,
                      const LossMap& losses, const scoring::ScoreMap& scores,
                      const scoring::EmbeddingSet& embeddings, const StudyOptions& options) {
    if (manifest.specs.empty()) throw DataError("study: manifest has no fusion specs");
    std::vector<std::string> missing;
    for (const auto& spec : manifest.specs) {
        if (!losses.count(spec.label)) missing.push_back(spec.label);
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw DataError("study: no loss for " + std::to_string(missing.size()) + " label(s): " + list);
    }

    StudyResult result;
    for (auto& [label, vec] : dataset_indicators(manifest, corpora, scores, embeddings, options.indicators)) {
        stats::Observation obs;
        obs.label = label;
        obs.loss = losses.at(label);
        obs.indicators = vec;
        result.observations.push_back(std::move(obs));
    }

    result.summary = stats::describe(result.observations);
    for (auto ind : indicators::kAllIndicators) {
        std::vector<double> column;
        for (const auto& o : result.observations) column.push_back(o.indicators[ind]);
        const std::string name(indicators::name(ind));
        try {
            result.ks.push_back(stats::ks_test(column, stats::Reference::fitted_normal(), name));
        } catch (const DataError& e) {
            result.ks_errors.emplace_back(name, e.what());
        }
    }

    const auto design = stats::make_design(result.observations, indicators::kAllIndicators, options.log_target);
    result.fit = stats::stepwise(design.y, design.x, design.names, options.alpha);

    Json& r = result.report;
    r["n"] = result.observations.size();
    r["target"] = options.log_target ? "log_loss" : "loss";
    r["master_seed"] = manifest.master_seed;
    Json obs = Json::array();
    for (const auto& o : result.observations) {
        obs.push_back({{"label", o.label}, {"loss", o.loss}, {"indicators", o.indicators.to_json()}});
    }
    r["observations"] = std::move(obs);
    Json summary = Json::object();
    for (const auto& [name, s] : result.summary) summary[name] = s.to_json();
    r["describe"] = std::move(summary);
    Json ks = Json::array();
    for (const auto& k : result.ks) ks.push_back(k.to_json());
    for (const auto& [name, why] : result.ks_errors) ks.push_back({{"variable", name}, {"error", why}});
    r["ks"] = std::move(ks);
    r["ols"] = result.fit.full.to_json(true);
    r["stepwise"] = result.fit.to_json();
    if (options.log_target) r["rule"] = rule::from_fit(result.fit.fit).to_json();
    return result;
}

}  // namespace instructmine::study
