// SPDX-License-Identifier: Apache-2.0
#include "instructmine/indicators.hpp"

#include <algorithm>
#include <unordered_set>

#include "instructmine/error.hpp"
#include "instructmine/text.hpp"

namespace instructmine::indicators {

namespace {

constexpr std::array<std::string_view, 8> kNames{"Len", "Rew", "PPL", "MTLD", "Knn6", "Nat", "Coh", "Und"};
constexpr std::array<std::string_view, 8> kColumns{"len", "rew", "ppl", "mtld", "knn6", "nat", "coh", "und"};

bool is_punct(char32_t c) {
    if (c < 0x80) {
        return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
               (c >= '{' && c <= '~');
    }
    return c == 0xA1 || c == 0xA7 || c == 0xAB || c == 0xB6 || c == 0xB7 || c == 0xBB ||
           c == 0xBF || (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
           (c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011) || c == 0xFF01 ||
           c == 0xFF0C || c == 0xFF0E || c == 0xFF1A || c == 0xFF1B || c == 0xFF1F;
}

std::string list_ids(const std::vector<std::string>& ids) {
    std::string out;
    for (const auto& id : ids) out += (out.empty() ? "" : ", ") + id;
    return out;
}

}  // namespace

std::string_view name(Indicator indicator) { return kNames[static_cast<std::size_t>(indicator)]; }
std::string_view column(Indicator indicator) { return kColumns[static_cast<std::size_t>(indicator)]; }

Indicator parse_indicator(std::string_view text) {
    std::string key = text::lower_ascii(text);
    key.erase(std::remove(key.begin(), key.end(), '_'), key.end());
    for (Indicator i : kAllIndicators) {
        if (key == column(i)) return i;
    }
    throw UsageError("unknown indicator \"" + std::string(text) + "\"");
}

Json IndicatorVector::to_json() const {
    Json out;
    for (Indicator i : kAllIndicators) out[std::string(name(i))] = number_or_null((*this)[i]);
    return out;
}

IndicatorVector IndicatorVector::from_json(const Json& value) {
    IndicatorVector v;
    for (Indicator i : kAllIndicators) {
        auto it = value.find(std::string(name(i)));
        if (it == value.end() || !it->is_number()) {
            throw DataError("indicator vector lacks numeric \"" + std::string(name(i)) + "\"");
        }
        v[i] = it->get<double>();
    }
    return v;
}

double mean_of(std::span<const double> values) {
    if (values.empty()) throw DataError("mean of an empty set");
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

SampleValues length(const corpus::Corpus& corpus) {
    if (corpus.empty()) throw DataError("length: corpus \"" + corpus.name + "\" is empty");
    SampleValues out;
    for (const auto& s : corpus.samples) {
        out.ids.push_back(s.id);
        out.values.push_back(static_cast<double>(text::char_count(s.response)));
    }
    out.mean = mean_of(out.values);
    return out;
}

std::vector<std::string> mtld_tokens(std::string_view input, const MtldOptions& options) {
    const std::string source = options.lowercase ? text::lower_ascii(input) : std::string(input);
    std::vector<std::string> tokens;
    for (const auto& raw : text::split_whitespace(source)) {
        std::u32string cps = text::decode_utf8(raw);
        std::size_t begin = 0;
        std::size_t end = cps.size();
        while (begin < end && is_punct(cps[begin])) ++begin;
        while (end > begin && is_punct(cps[end - 1])) --end;
        if (begin == end) continue;
        tokens.push_back(text::encode_utf8(std::u32string_view(cps).substr(begin, end - begin)));
    }
    return tokens;
}

double mtld_factors(std::span<const std::string> tokens, double ttr_threshold) {
    double factors = 0.0;
    std::unordered_set<std::string_view> types;
    std::size_t count = 0;
    double ttr = 1.0;
    for (const auto& token : tokens) {
        ++count;
        types.insert(token);
        ttr = static_cast<double>(types.size()) / static_cast<double>(count);
        if (ttr <= ttr_threshold) {
            factors += 1.0;
            types.clear();
            count = 0;
            ttr = 1.0;
        }
    }
    return factors + (1.0 - ttr) / (1.0 - ttr_threshold);
}

double mtld_pass(std::span<const std::string> tokens, double ttr_threshold) {
    if (tokens.empty()) throw DataError("mtld: no tokens");
    const auto n = static_cast<double>(tokens.size());
    const double factors = mtld_factors(tokens, ttr_threshold);
    if (factors > 0.0) return n / factors;
    return n * (n + 1.0) * (1.0 - ttr_threshold);
}

double mtld(std::string_view input, const MtldOptions& options) {
    if (!(options.ttr_threshold > 0.0 && options.ttr_threshold < 1.0)) {
        throw UsageError("mtld: ttr threshold must lie in (0, 1)");
    }
    std::vector<std::string> tokens = mtld_tokens(input, options);
    if (tokens.empty()) throw DataError("mtld: text has no tokens");
    const double forward = mtld_pass(tokens, options.ttr_threshold);
    std::reverse(tokens.begin(), tokens.end());
    const double backward = mtld_pass(tokens, options.ttr_threshold);
    return (forward + backward) / 2.0;
}

SampleValues mtld(const corpus::Corpus& corpus, const MtldOptions& options) {
    if (corpus.empty()) throw DataError("mtld: corpus \"" + corpus.name + "\" is empty");
    SampleValues out;
    for (const auto& s : corpus.samples) {
        out.ids.push_back(s.id);
        try {
            out.values.push_back(mtld(s.response, options));
        } catch (const DataError& e) {
            throw DataError("sample \"" + s.id + "\": " + e.what());
        }
    }
    out.mean = mean_of(out.values);
    return out;
}

Json IndicatorReport::to_json() const {
    Json out;
    out["n"] = ids.size();
    out["dataset"] = dataset.to_json();
    Json knn;
    knn["i"] = options.knn.i;
    knn["metric"] = std::string(to_string(options.knn.metric));
    knn["mode"] = std::string(to_string(options.knn.mode));
    knn["reduce"] = std::string(to_string(options.knn.reduce));
    knn["scope"] = options.scope == KnnScope::dataset ? "dataset" : "pool";
    if (knn_recall) knn["estimated_recall"] = *knn_recall;
    out["knn"] = std::move(knn);
    out["mtld_ttr_threshold"] = options.mtld.ttr_threshold;
    Json samples;
    samples["id"] = ids;
    for (Indicator i : kAllIndicators) samples[std::string(column(i))] = values(i);
    out["per_sample"] = std::move(samples);
    return out;
}

IndicatorReport aggregate(const corpus::Corpus& corpus, const scoring::ScoreMap& scores,
                          const scoring::EmbeddingSet& embeddings, const AggregateOptions& options) {
    if (corpus.empty()) throw DataError("aggregate: corpus \"" + corpus.name + "\" is empty");
    corpus.index();

    std::vector<std::string> no_scores;
    std::vector<std::string> no_embedding;
    for (const auto& s : corpus.samples) {
        if (scores.find(s.id) == scores.end()) no_scores.push_back(s.id);
        if (!embeddings.contains(s.id)) no_embedding.push_back(s.id);
    }
    if (!no_scores.empty() || !no_embedding.empty()) {
        std::string message = "aggregate: uncovered ids";
        if (!no_scores.empty()) message += "; no scores for " + list_ids(no_scores);
        if (!no_embedding.empty()) message += "; no embedding for " + list_ids(no_embedding);
        throw DataError(message);
    }

    IndicatorReport report;
    report.options = options;
    const SampleValues len = length(corpus);
    const SampleValues lex = mtld(corpus, options.mtld);
    report.ids = len.ids;
    report.per_sample[static_cast<std::size_t>(Indicator::len)] = len.values;
    report.per_sample[static_cast<std::size_t>(Indicator::mtld)] = lex.values;

    for (const auto& s : corpus.samples) {
        const auto& sc = scores.at(s.id);
        report.per_sample[static_cast<std::size_t>(Indicator::rew)].push_back(sc.rew);
        report.per_sample[static_cast<std::size_t>(Indicator::ppl)].push_back(sc.ppl);
        report.per_sample[static_cast<std::size_t>(Indicator::nat)].push_back(sc.nat);
        report.per_sample[static_cast<std::size_t>(Indicator::coh)].push_back(sc.coh);
        report.per_sample[static_cast<std::size_t>(Indicator::und)].push_back(sc.und);
    }

    auto& knn_column = report.per_sample[static_cast<std::size_t>(Indicator::knn6)];
    if (options.scope == KnnScope::dataset) {
        KnnValues knn = knn_i(report.ids, embeddings, options.knn);
        knn_column = std::move(knn.values.values);
        report.knn_recall = knn.estimated_recall;
    } else {
        std::vector<std::string> pool_ids;
        for (const auto& [id, v] : embeddings.vectors()) pool_ids.push_back(id);
        KnnValues knn = knn_i(pool_ids, embeddings, options.knn);
        std::unordered_map<std::string, double> by_id;
        for (std::size_t k = 0; k < pool_ids.size(); ++k) by_id.emplace(pool_ids[k], knn.values.values[k]);
        for (const auto& id : report.ids) knn_column.push_back(by_id.at(id));
        report.knn_recall = knn.estimated_recall;
    }

    for (Indicator i : kAllIndicators) report.dataset[i] = mean_of(report.values(i));
    return report;
}

}  // namespace instructmine::indicators
