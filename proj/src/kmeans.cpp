// SPDX-License-Identifier: Apache-2.0
#include "instructmine/kmeans.hpp"

#include <limits>

#include "instructmine/error.hpp"
#include "instructmine/rng.hpp"

namespace instructmine {

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double sum = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double diff = a[d] - b[d];
        sum += diff * diff;
    }
    return sum;
}

}  // namespace

KMeansResult kmeans(std::span<const std::vector<double>> points, std::size_t k,
                    std::uint64_t seed, std::size_t max_iterations) {
    if (k == 0 || k > points.size()) {
        throw UsageError("kmeans: k must be in [1, number of points]");
    }
    const std::size_t dim = points.front().size();
    for (const auto& p : points) {
        if (p.size() != dim) throw DataError("kmeans: points have mixed dimensions");
    }

    KMeansResult result;
    Rng rng(seed);
    for (std::size_t idx : rng.sample_indices(points.size(), k)) {
        result.centroids.push_back(points[idx]);
    }
    result.assignment.assign(points.size(), std::numeric_limits<std::size_t>::max());

    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            std::size_t best = 0;
            double best_dist = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double dist = squared_distance(points[i], result.centroids[c]);
                if (dist < best_dist) {
                    best_dist = dist;
                    best = c;
                }
            }
            if (result.assignment[i] != best) {
                result.assignment[i] = best;
                changed = true;
            }
        }
        result.iterations = iter + 1;
        if (!changed) {
            result.converged = true;
            break;
        }

        std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            auto& sum = sums[result.assignment[i]];
            for (std::size_t d = 0; d < dim; ++d) sum[d] += points[i][d];
            ++counts[result.assignment[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            for (std::size_t d = 0; d < dim; ++d) {
                result.centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
            }
        }
    }
    return result;
}

}  // namespace instructmine
