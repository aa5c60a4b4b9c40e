// SPDX-License-Identifier: Apache-2.0
#include "instructmine/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "instructmine/error.hpp"
#include "instructmine/rng.hpp"

namespace instructmine::sampling {

std::vector<std::size_t> allocate(std::span<const double> weights, std::size_t size) {
    if (weights.empty()) throw UsageError("allocate: no weights");
    double total = 0.0;
    for (double w : weights) {
        if (!(w > 0.0) || !std::isfinite(w)) throw UsageError("allocate: weights must be positive");
        total += w;
    }
    std::vector<std::size_t> out(weights.size());
    std::vector<double> remainder(weights.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double quota = static_cast<double>(size) * weights[i] / total;
        out[i] = static_cast<std::size_t>(std::floor(quota));
        remainder[i] = quota - static_cast<double>(out[i]);
        assigned += out[i];
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t r = 0; assigned < size; r = (r + 1) % order.size()) {
        ++out[order[r]];
        ++assigned;
    }
    // Rounding error can push the floors past `size`; trim the smallest remainders.
    for (std::size_t r = order.size(); assigned > size;) {
        r = (r == 0 ? order.size() : r) - 1;
        if (out[order[r]] > 0) {
            --out[order[r]];
            --assigned;
        }
    }
    return out;
}

Json FusionSpec::to_json() const {
    Json out;
    out["label"] = label;
    out["corpora"] = corpora;
    out["size"] = size;
    out["seed"] = seed;
    out["weights"] = weights;
    return out;
}

FusionSpec FusionSpec::from_json(const Json& value) {
    FusionSpec spec;
    try {
        spec.label = value.at("label").get<std::string>();
        spec.corpora = value.at("corpora").get<std::vector<std::string>>();
        spec.size = value.value("size", kFusionSize);
        spec.seed = value.at("seed").get<std::uint64_t>();
        if (value.contains("weights")) spec.weights = value["weights"].get<std::vector<double>>();
    } catch (const Json::exception& e) {
        throw DataError(std::string("invalid fusion spec: ") + e.what());
    }
    return spec;
}

std::vector<double> draw_weights(std::size_t corpora, std::uint64_t seed) {
    Rng rng(seed, "fusion/weights");
    std::vector<double> out(corpora);
    for (auto& w : out) w = rng.unit_open_left();
    return out;
}

FusionResult fuse(const FusionSpec& spec, const std::map<std::string, corpus::Corpus>& corpora) {
    if (spec.corpora.empty()) throw UsageError("fuse: spec \"" + spec.label + "\" names no corpora");
    FusionResult result;
    result.weights = spec.weights.empty() ? draw_weights(spec.corpora.size(), spec.seed) : spec.weights;
    if (result.weights.size() != spec.corpora.size()) {
        throw UsageError("fuse: spec \"" + spec.label + "\" has " + std::to_string(result.weights.size()) +
                         " weights for " + std::to_string(spec.corpora.size()) + " corpora");
    }
    result.allocations = allocate(result.weights, spec.size);

    std::vector<const corpus::Corpus*> sources;
    std::string shortfall;
    for (std::size_t c = 0; c < spec.corpora.size(); ++c) {
        auto it = corpora.find(spec.corpora[c]);
        if (it == corpora.end()) throw DataError("fuse: unknown corpus \"" + spec.corpora[c] + "\"");
        sources.push_back(&it->second);
        if (result.allocations[c] > it->second.size()) {
            shortfall += "\n  " + spec.corpora[c] + ": needs " + std::to_string(result.allocations[c]) +
                         ", has " + std::to_string(it->second.size());
        }
    }
    if (!shortfall.empty()) {
        throw DataError("fuse: spec \"" + spec.label + "\" over-allocates" + shortfall);
    }

    result.corpus.name = spec.label;
    std::unordered_set<std::string> seen;
    for (std::size_t c = 0; c < sources.size(); ++c) {
        Rng rng(spec.seed, "fusion/draw/" + spec.corpora[c]);
        for (std::size_t idx : rng.sample_indices(sources[c]->size(), result.allocations[c])) {
            corpus::InstructionSample sample = sources[c]->samples[idx];
            if (!seen.insert(sample.id).second) {
                throw DataError("fuse: id \"" + sample.id + "\" occurs in more than one corpus");
            }
            result.corpus.samples.push_back(std::move(sample));
        }
    }
    return result;
}

std::vector<std::size_t> tier_starts(std::size_t pool_size, std::size_t size, std::size_t k) {
    if (k == 0) throw UsageError("tiers: k must be at least 1");
    if (size == 0) throw UsageError("tiers: size must be at least 1");
    if (pool_size < size) {
        throw DataError("tiers: pool of " + std::to_string(pool_size) + " is smaller than tier size " +
                        std::to_string(size));
    }
    std::vector<std::size_t> starts;
    const std::size_t span = pool_size - size;
    for (std::size_t j = 0; j < k; ++j) starts.push_back(k == 1 ? 0 : j * span / (k - 1));
    return starts;
}

std::vector<corpus::Corpus> tier_slices(const corpus::Corpus& pool,
                                        const std::unordered_map<std::string, double>& per_sample,
                                        const TierSpec& spec) {
    const auto starts = tier_starts(pool.size(), spec.size, spec.k);
    if (!spec.allow_overlap && spec.k * spec.size > pool.size()) {
        throw DataError("tiers: " + std::to_string(spec.k) + " tiers of " + std::to_string(spec.size) +
                        " would overlap in a pool of " + std::to_string(pool.size()));
    }
    struct Keyed {
        double value;
        const corpus::InstructionSample* sample;
    };
    std::vector<Keyed> sorted;
    sorted.reserve(pool.size());
    std::vector<std::string> missing;
    for (const auto& s : pool.samples) {
        auto it = per_sample.find(s.id);
        if (it == per_sample.end()) {
            missing.push_back(s.id);
            continue;
        }
        sorted.push_back({it->second, &s});
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
        throw DataError("tiers: no " + std::string(indicators::name(spec.indicator)) + " value for " + list);
    }
    std::sort(sorted.begin(), sorted.end(), [](const Keyed& a, const Keyed& b) {
        if (a.value != b.value) return a.value < b.value;
        return a.sample->id < b.sample->id;
    });

    std::vector<corpus::Corpus> tiers;
    for (std::size_t j = 0; j < starts.size(); ++j) {
        corpus::Corpus tier;
        tier.name = pool.name + "-" + std::string(indicators::column(spec.indicator)) + "-tier" +
                    std::to_string(j + 1);
        for (std::size_t r = starts[j]; r < starts[j] + spec.size; ++r) tier.samples.push_back(*sorted[r].sample);
        tiers.push_back(std::move(tier));
    }
    return tiers;
}

Json StudyManifest::to_json() const {
    Json out;
    out["master_seed"] = master_seed;
    out["size"] = size;
    out["corpora"] = Json::array();
    for (const auto& [name, path] : corpora) {
        out["corpora"].push_back({{"name", name}, {"path", path.generic_string()}});
    }
    out["specs"] = Json::array();
    for (const auto& spec : specs) out["specs"].push_back(spec.to_json());
    return out;
}

StudyManifest StudyManifest::from_json(const Json& value) {
    StudyManifest m;
    try {
        m.master_seed = value.at("master_seed").get<std::uint64_t>();
        m.size = value.value("size", kFusionSize);
        for (const auto& c : value.at("corpora")) {
            m.corpora.emplace_back(c.at("name").get<std::string>(), c.at("path").get<std::string>());
        }
        for (const auto& s : value.at("specs")) m.specs.push_back(FusionSpec::from_json(s));
    } catch (const Json::exception& e) {
        throw DataError(std::string("invalid manifest: ") + e.what());
    }
    return m;
}

std::string StudyManifest::serialize() const { return to_json().dump(2) + "\n"; }

StudyManifest StudyManifest::load(const std::filesystem::path& path) {
    Json value;
    try {
        value = Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    StudyManifest m = from_json(value);
    // Relative corpus paths are relative to the manifest itself.
    for (auto& [name, p] : m.corpora) {
        if (p.is_relative()) p = path.parent_path() / p;
    }
    return m;
}

StudyManifest study_manifest(std::size_t fusions, std::uint64_t seed,
                             std::vector<std::pair<std::string, std::filesystem::path>> corpora,
                             std::size_t size) {
    if (fusions == 0) throw UsageError("study manifest: fusions must be at least 1");
    if (corpora.empty()) throw UsageError("study manifest: no candidate corpora");
    StudyManifest m;
    m.master_seed = seed;
    m.size = size;
    m.corpora = std::move(corpora);
    std::vector<std::string> names;
    for (const auto& [name, path] : m.corpora) names.push_back(name);
    const std::size_t width = std::max<std::size_t>(3, std::to_string(fusions - 1).size());
    for (std::size_t f = 0; f < fusions; ++f) {
        FusionSpec spec;
        const std::string number = std::to_string(f);
        spec.label = "fusion-" + std::string(width - number.size(), '0') + number;
        spec.corpora = names;
        spec.size = size;
        spec.seed = derive_seed(seed, "study/" + spec.label);
        spec.weights = draw_weights(names.size(), spec.seed);
        m.specs.push_back(std::move(spec));
    }
    return m;
}

}  // namespace instructmine::sampling
