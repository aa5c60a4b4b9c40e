// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace instructmine {

struct KMeansResult {
    std::vector<std::size_t> assignment;          // cluster of each point
    std::vector<std::vector<double>> centroids;
    std::size_t iterations = 0;
    bool converged = false;                        // assignments stopped changing
};

/// Lloyd's algorithm on squared euclidean distance. Initial centroids are k
/// distinct points drawn with `seed`; a cluster that empties keeps its last
/// centroid. Requires 1 <= k <= points.size() and a shared dimension.
KMeansResult kmeans(std::span<const std::vector<double>> points, std::size_t k,
                    std::uint64_t seed, std::size_t max_iterations = 100);

}  // namespace instructmine
