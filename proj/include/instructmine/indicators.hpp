// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "instructmine/corpus.hpp"
#include "instructmine/json.hpp"
#include "instructmine/scoring.hpp"

namespace instructmine::indicators {

/// The eight data-quality indicators, in the column order of observation files.
enum class Indicator { len, rew, ppl, mtld, knn6, nat, coh, und };

inline constexpr std::array<Indicator, 8> kAllIndicators{
    Indicator::len, Indicator::rew, Indicator::ppl, Indicator::mtld,
    Indicator::knn6, Indicator::nat, Indicator::coh, Indicator::und};

/// Display name ("Len", "Rew", "PPL", "MTLD", "Knn6", "Nat", "Coh", "Und").
std::string_view name(Indicator indicator);
/// Lower-case column name ("len", ..., "knn6", ...).
std::string_view column(Indicator indicator);
/// Accepts display names, column names and "knn_6"; case-insensitive.
Indicator parse_indicator(std::string_view text);

/// Dataset-level indicator values: each one is the mean of its per-sample values.
struct IndicatorVector {
    std::array<double, 8> values{};

    double operator[](Indicator i) const { return values[static_cast<std::size_t>(i)]; }
    double& operator[](Indicator i) { return values[static_cast<std::size_t>(i)]; }
    Json to_json() const;
    static IndicatorVector from_json(const Json& value);
};

/// Per-sample values in corpus order plus their arithmetic mean.
struct SampleValues {
    std::vector<std::string> ids;
    std::vector<double> values;
    double mean = 0.0;
};

/// Left-to-right sum divided by n, so results are bitwise reproducible.
double mean_of(std::span<const double> values);

// ---- Len ------------------------------------------------------------------

/// Response length in Unicode characters. Throws DataError on an empty corpus.
SampleValues length(const corpus::Corpus& corpus);

// ---- MTLD -----------------------------------------------------------------

struct MtldOptions {
    double ttr_threshold = 0.72;
    bool lowercase = true;
};

/// Whitespace tokens, lower-cased (ASCII) when requested, with leading and
/// trailing punctuation removed; tokens that are pure punctuation vanish.
std::vector<std::string> mtld_tokens(std::string_view text, const MtldOptions& options = {});

/// Factor count of one pass. A factor closes when the running type-token ratio
/// drops to the threshold; the leftover segment adds (1 - ttr) / (1 - threshold).
double mtld_factors(std::span<const std::string> tokens, double ttr_threshold);

/// One-direction MTLD = tokens / factors. When no factor ever starts to form
/// (every token distinct) the leftover is scored as if one repeat followed,
/// giving n (n + 1) (1 - threshold) instead of a division by zero.
double mtld_pass(std::span<const std::string> tokens, double ttr_threshold);

/// Mean of the forward and backward passes. Throws DataError when the text
/// has no tokens.
double mtld(std::string_view text, const MtldOptions& options = {});

/// Per-sample MTLD of responses; a response without tokens is an error naming it.
SampleValues mtld(const corpus::Corpus& corpus, const MtldOptions& options = {});

// ---- KNN-i ----------------------------------------------------------------

enum class Metric { cosine, euclidean };
enum class KnnMode { exact, approximate };
/// Distance to the i-th neighbour, or the mean over the first i neighbours.
enum class KnnReduce { ith, mean_first };

std::string_view to_string(Metric metric);
std::string_view to_string(KnnMode mode);
std::string_view to_string(KnnReduce reduce);
Metric parse_metric(std::string_view text);
KnnMode parse_knn_mode(std::string_view text);

double distance(std::span<const double> a, std::span<const double> b, Metric metric);

struct Neighbor {
    std::size_t index;
    double distance;
};

struct NnDescentOptions {
    std::size_t graph_k = 24;        // neighbours kept per node while building
    double sample_rate = 1.0;        // rho: fraction of new/old lists joined per round
    double termination = 0.001;      // stop when updates < termination * n * graph_k
    std::size_t max_iterations = 30;
    std::uint64_t seed = 0;
};

/// The k nearest other points of every point, ascending by distance, by
/// brute force. Each pairwise distance is computed once.
std::vector<std::vector<Neighbor>> exact_neighbors(std::span<const std::vector<double>> points,
                                                   std::size_t k, Metric metric);

/// Approximate k nearest neighbours via NN-descent graph refinement.
std::vector<std::vector<Neighbor>> nn_descent(std::span<const std::vector<double>> points,
                                              std::size_t k, Metric metric,
                                              const NnDescentOptions& options = {});

/// Fraction of exact top-k ids recovered by `approx`, averaged over points.
double recall_at(const std::vector<std::vector<Neighbor>>& approx,
                 const std::vector<std::vector<Neighbor>>& exact, std::size_t k);

struct KnnOptions {
    std::size_t i = 6;
    Metric metric = Metric::cosine;
    KnnMode mode = KnnMode::exact;
    KnnReduce reduce = KnnReduce::ith;
    NnDescentOptions descent{};
    std::size_t recall_probe = 64;  // points checked against brute force in approximate mode
};

struct KnnValues {
    SampleValues values;
    std::optional<double> estimated_recall;  // approximate mode only
};

/// Per-sample KNN-i over the given points; throws DataError with fewer than
/// i + 1 points or mixed dimensions.
KnnValues knn_i(std::span<const std::string> ids, std::span<const std::vector<double>> points,
                const KnnOptions& options = {});

/// Same, with vectors looked up by id.
KnnValues knn_i(std::span<const std::string> ids, const scoring::EmbeddingSet& embeddings,
                const KnnOptions& options = {});

// ---- dataset aggregation ----------------------------------------------------

/// Where neighbours of a sample are searched: among the dataset being scored,
/// or among every vector of the supplied embedding set (the candidate pool).
enum class KnnScope { dataset, pool };

struct AggregateOptions {
    MtldOptions mtld{};
    KnnOptions knn{};
    KnnScope scope = KnnScope::dataset;
};

struct IndicatorReport {
    std::vector<std::string> ids;
    std::array<std::vector<double>, 8> per_sample;
    IndicatorVector dataset;
    AggregateOptions options;
    std::optional<double> knn_recall;

    const std::vector<double>& values(Indicator i) const {
        return per_sample[static_cast<std::size_t>(i)];
    }
    Json to_json() const;
};

/// Dataset-level indicators: Len, MTLD and KNN computed here, the model-based
/// scores averaged from the sidecar. Throws DataError listing ids lacking
/// scores or embeddings.
IndicatorReport aggregate(const corpus::Corpus& corpus, const scoring::ScoreMap& scores,
                          const scoring::EmbeddingSet& embeddings, const AggregateOptions& options = {});

}  // namespace instructmine::indicators
