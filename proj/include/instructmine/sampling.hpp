// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "instructmine/corpus.hpp"
#include "instructmine/indicators.hpp"
#include "instructmine/json.hpp"

namespace instructmine::sampling {

inline constexpr std::size_t kFusionSize = 2000;
inline constexpr std::size_t kTierCount = 8;
inline constexpr std::size_t kStudyFusions = 78;

/// Proportional split of `size` by `weights` with largest-remainder rounding:
/// floors of size * w_i / sum(w) first, then one extra unit to the largest
/// fractional parts (lower index wins ties). Always sums to `size`.
std::vector<std::size_t> allocate(std::span<const double> weights, std::size_t size);

/// One random fusion of named candidate corpora.
struct FusionSpec {
    std::string label;
    std::vector<std::string> corpora;  // names, resolved against the study's corpus table
    std::size_t size = kFusionSize;
    std::uint64_t seed = 0;
    std::vector<double> weights;       // r_i in (0, 1]; drawn from `seed` when empty

    Json to_json() const;
    static FusionSpec from_json(const Json& value);
};

/// r_i ~ Uniform(0, 1] for each corpus, from the spec's own seed.
std::vector<double> draw_weights(std::size_t corpora, std::uint64_t seed);

struct FusionResult {
    corpus::Corpus corpus;
    std::vector<double> weights;
    std::vector<std::size_t> allocations;
};

/// Samples allocation_i members without replacement from each corpus and
/// concatenates them in corpus order. Throws DataError with a per-corpus
/// report when an allocation exceeds its corpus.
FusionResult fuse(const FusionSpec& spec, const std::map<std::string, corpus::Corpus>& corpora);

struct TierSpec {
    indicators::Indicator indicator = indicators::Indicator::rew;
    std::size_t k = kTierCount;
    std::size_t size = kFusionSize;
    /// Windows overlap when the pool holds fewer than k * size samples; that is
    /// rejected unless explicitly allowed.
    bool allow_overlap = false;
};

/// Start ranks floor(j * (N - size) / (k - 1)) for j = 0..k-1 (just 0 when k = 1).
std::vector<std::size_t> tier_starts(std::size_t pool_size, std::size_t size, std::size_t k);

/// Sorts the pool ascending by indicator value (ties by id) and cuts k windows
/// of `size` consecutive samples at the tier starts.
std::vector<corpus::Corpus> tier_slices(const corpus::Corpus& pool,
                                        const std::unordered_map<std::string, double>& per_sample,
                                        const TierSpec& spec);

/// Seeded multivariate study: `fusions` specs over the same corpus list, each
/// with its own derived seed and recorded weights.
struct StudyManifest {
    std::uint64_t master_seed = 0;
    std::size_t size = kFusionSize;
    std::vector<std::pair<std::string, std::filesystem::path>> corpora;  // name, store path
    std::vector<FusionSpec> specs;

    Json to_json() const;
    static StudyManifest from_json(const Json& value);
    std::string serialize() const;
    static StudyManifest load(const std::filesystem::path& path);
};

StudyManifest study_manifest(std::size_t fusions, std::uint64_t seed,
                             std::vector<std::pair<std::string, std::filesystem::path>> corpora,
                             std::size_t size = kFusionSize);

}  // namespace instructmine::sampling
