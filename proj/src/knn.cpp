// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "instructmine/error.hpp"
#include "instructmine/indicators.hpp"
#include "instructmine/rng.hpp"
#include "instructmine/text.hpp"

namespace instructmine::indicators {

namespace {

bool closer(const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) sum += a[d] * b[d];
    return sum;
}

// Distances over a fixed point set with squared norms cached for cosine.
class PointMetric {
public:
    PointMetric(std::span<const std::vector<double>> points, Metric metric)
        : points_(points), metric_(metric) {
        if (metric_ == Metric::cosine) {
            squared_norms_.reserve(points.size());
            for (const auto& p : points) squared_norms_.push_back(dot(p, p));
        }
    }

    double operator()(std::size_t a, std::size_t b) const {
        if (metric_ == Metric::euclidean) return distance(points_[a], points_[b], Metric::euclidean);
        const double sim = dot(points_[a], points_[b]) / std::sqrt(squared_norms_[a] * squared_norms_[b]);
        return std::max(0.0, 1.0 - sim);
    }

private:
    std::span<const std::vector<double>> points_;
    Metric metric_;
    std::vector<double> squared_norms_;
};

void check_points(std::span<const std::vector<double>> points, std::size_t k) {
    if (k == 0) throw UsageError("knn: neighbour count must be at least 1");
    if (points.size() < k + 1) {
        throw DataError("knn: need at least " + std::to_string(k + 1) + " points, got " +
                        std::to_string(points.size()));
    }
    const std::size_t dim = points.front().size();
    for (const auto& p : points) {
        if (p.size() != dim) throw DataError("knn: points have mixed dimensions");
    }
}

// Bounded candidate list for one node, ascending by (distance, index).
struct Candidate {
    std::uint32_t index;
    double distance;
    bool fresh;
};

bool try_insert(std::vector<Candidate>& list, std::size_t capacity, std::uint32_t index, double dist) {
    if (list.size() == capacity) {
        const auto& worst = list.back();
        if (dist > worst.distance || (dist == worst.distance && index >= worst.index)) return false;
    }
    for (const auto& c : list) {
        if (c.index == index) return false;
    }
    auto pos = std::find_if(list.begin(), list.end(), [&](const Candidate& c) {
        return dist < c.distance || (dist == c.distance && index < c.index);
    });
    list.insert(pos, Candidate{index, dist, true});
    if (list.size() > capacity) list.pop_back();
    return true;
}

// Up to `count` members of `items` chosen uniformly, order randomized.
template <typename T>
void keep_random(std::vector<T>& items, std::size_t count, Rng& rng) {
    if (items.size() <= count) return;
    for (std::size_t i = 0; i < count; ++i) std::swap(items[i], items[i + rng.below(items.size() - i)]);
    items.resize(count);
}

}  // namespace

std::string_view to_string(Metric metric) { return metric == Metric::cosine ? "cosine" : "euclidean"; }
std::string_view to_string(KnnMode mode) { return mode == KnnMode::exact ? "exact" : "approximate"; }
std::string_view to_string(KnnReduce reduce) { return reduce == KnnReduce::ith ? "ith" : "mean_first"; }

Metric parse_metric(std::string_view text) {
    const std::string t = text::lower_ascii(text);
    if (t == "cosine") return Metric::cosine;
    if (t == "euclidean" || t == "l2") return Metric::euclidean;
    throw UsageError("unknown metric \"" + std::string(text) + "\"");
}

KnnMode parse_knn_mode(std::string_view text) {
    const std::string t = text::lower_ascii(text);
    if (t == "exact") return KnnMode::exact;
    if (t == "approximate" || t == "approx") return KnnMode::approximate;
    throw UsageError("unknown knn mode \"" + std::string(text) + "\"");
}

double distance(std::span<const double> a, std::span<const double> b, Metric metric) {
    if (a.size() != b.size()) throw DataError("distance: dimension mismatch");
    if (metric == Metric::cosine) {
        const double sim = dot(a, b) / std::sqrt(dot(a, a) * dot(b, b));
        return std::max(0.0, 1.0 - sim);
    }
    double sum = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double diff = a[d] - b[d];
        sum += diff * diff;
    }
    return std::sqrt(sum);
}

std::vector<std::vector<Neighbor>> exact_neighbors(std::span<const std::vector<double>> points,
                                                   std::size_t k, Metric metric) {
    check_points(points, k);
    const PointMetric dist(points, metric);
    const std::size_t n = points.size();
    // Max-heaps on (distance, index): the top is the current k-th neighbour.
    std::vector<std::vector<Neighbor>> heaps(n);
    for (auto& h : heaps) h.reserve(k + 1);
    auto offer = [&](std::vector<Neighbor>& heap, Neighbor candidate) {
        if (heap.size() < k) {
            heap.push_back(candidate);
            std::push_heap(heap.begin(), heap.end(), closer);
        } else if (closer(candidate, heap.front())) {
            std::pop_heap(heap.begin(), heap.end(), closer);
            heap.back() = candidate;
            std::push_heap(heap.begin(), heap.end(), closer);
        }
    };
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            const double d = dist(a, b);
            offer(heaps[a], {b, d});
            offer(heaps[b], {a, d});
        }
    }
    for (auto& h : heaps) std::sort_heap(h.begin(), h.end(), closer);
    return heaps;
}

std::vector<std::vector<Neighbor>> nn_descent(std::span<const std::vector<double>> points,
                                              std::size_t k, Metric metric,
                                              const NnDescentOptions& options) {
    check_points(points, k);
    const std::size_t n = points.size();
    const std::size_t capacity = std::min(std::max(options.graph_k, k), n - 1);
    if (capacity == n - 1) return exact_neighbors(points, k, metric);

    const PointMetric dist(points, metric);
    Rng rng(options.seed, "knn/nn-descent");
    std::vector<std::vector<Candidate>> graph(n);

    for (std::size_t v = 0; v < n; ++v) {
        std::unordered_set<std::size_t> picked;
        while (picked.size() < capacity) {
            const std::size_t u = rng.below(n);
            if (u != v) picked.insert(u);
        }
        std::vector<std::size_t> ordered(picked.begin(), picked.end());
        std::sort(ordered.begin(), ordered.end());
        for (std::size_t u : ordered) {
            try_insert(graph[v], capacity, static_cast<std::uint32_t>(u), dist(v, u));
        }
    }

    const auto sample_size = static_cast<std::size_t>(
        std::max(1.0, std::round(options.sample_rate * static_cast<double>(capacity))));
    for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
        std::vector<std::vector<std::uint32_t>> fresh(n), stale(n), rev_fresh(n), rev_stale(n);
        for (std::size_t v = 0; v < n; ++v) {
            std::vector<std::size_t> fresh_slots;
            for (std::size_t s = 0; s < graph[v].size(); ++s) {
                if (graph[v][s].fresh) {
                    fresh_slots.push_back(s);
                } else {
                    stale[v].push_back(graph[v][s].index);
                }
            }
            keep_random(fresh_slots, sample_size, rng);
            for (std::size_t s : fresh_slots) {
                graph[v][s].fresh = false;
                fresh[v].push_back(graph[v][s].index);
            }
            for (auto u : fresh[v]) rev_fresh[u].push_back(static_cast<std::uint32_t>(v));
            for (auto u : stale[v]) rev_stale[u].push_back(static_cast<std::uint32_t>(v));
        }
        for (std::size_t v = 0; v < n; ++v) {
            keep_random(rev_fresh[v], sample_size, rng);
            keep_random(rev_stale[v], sample_size, rng);
            fresh[v].insert(fresh[v].end(), rev_fresh[v].begin(), rev_fresh[v].end());
            stale[v].insert(stale[v].end(), rev_stale[v].begin(), rev_stale[v].end());
            for (auto* list : {&fresh[v], &stale[v]}) {
                std::sort(list->begin(), list->end());
                list->erase(std::unique(list->begin(), list->end()), list->end());
            }
        }

        std::size_t updates = 0;
        auto join = [&](std::uint32_t a, std::uint32_t b) {
            if (a == b) return;
            const double d = dist(a, b);
            updates += try_insert(graph[a], capacity, b, d);
            updates += try_insert(graph[b], capacity, a, d);
        };
        for (std::size_t v = 0; v < n; ++v) {
            const auto& nv = fresh[v];
            for (std::size_t x = 0; x < nv.size(); ++x) {
                for (std::size_t y = x + 1; y < nv.size(); ++y) join(nv[x], nv[y]);
                for (auto o : stale[v]) join(nv[x], o);
            }
        }
        if (static_cast<double>(updates) <
            options.termination * static_cast<double>(n) * static_cast<double>(capacity)) {
            break;
        }
    }

    std::vector<std::vector<Neighbor>> out(n);
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t s = 0; s < k; ++s) out[v].push_back({graph[v][s].index, graph[v][s].distance});
    }
    return out;
}

double recall_at(const std::vector<std::vector<Neighbor>>& approx,
                 const std::vector<std::vector<Neighbor>>& exact, std::size_t k) {
    if (approx.size() != exact.size() || approx.empty()) throw UsageError("recall_at: size mismatch");
    double total = 0.0;
    for (std::size_t v = 0; v < exact.size(); ++v) {
        std::size_t found = 0;
        const std::size_t kk = std::min({k, exact[v].size(), approx[v].size()});
        for (std::size_t a = 0; a < kk; ++a) {
            for (std::size_t e = 0; e < kk; ++e) {
                if (approx[v][a].index == exact[v][e].index) {
                    ++found;
                    break;
                }
            }
        }
        total += kk == 0 ? 1.0 : static_cast<double>(found) / static_cast<double>(kk);
    }
    return total / static_cast<double>(exact.size());
}

KnnValues knn_i(std::span<const std::string> ids, std::span<const std::vector<double>> points,
                const KnnOptions& options) {
    if (ids.size() != points.size()) throw UsageError("knn_i: ids and points differ in length");
    check_points(points, options.i);

    KnnValues out;
    std::vector<std::vector<Neighbor>> neighbors;
    if (options.mode == KnnMode::exact) {
        neighbors = exact_neighbors(points, options.i, options.metric);
    } else {
        neighbors = nn_descent(points, options.i, options.metric, options.descent);
        // Brute-force a seeded probe of points to report the recall achieved.
        const std::size_t probes = std::min(options.recall_probe, points.size());
        if (probes > 0) {
            Rng rng(options.descent.seed, "knn/recall-probe");
            const PointMetric dist(points, options.metric);
            double total = 0.0;
            for (std::size_t v : rng.sample_indices(points.size(), probes)) {
                std::vector<Neighbor> row;
                for (std::size_t u = 0; u < points.size(); ++u) {
                    if (u != v) row.push_back({u, dist(v, u)});
                }
                std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(options.i),
                                  row.end(), closer);
                row.resize(options.i);
                total += recall_at({neighbors[v]}, {row}, options.i);
            }
            out.estimated_recall = total / static_cast<double>(probes);
        }
    }

    out.values.ids.assign(ids.begin(), ids.end());
    for (const auto& row : neighbors) {
        if (options.reduce == KnnReduce::ith) {
            out.values.values.push_back(row[options.i - 1].distance);
        } else {
            double sum = 0.0;
            for (std::size_t s = 0; s < options.i; ++s) sum += row[s].distance;
            out.values.values.push_back(sum / static_cast<double>(options.i));
        }
    }
    out.values.mean = mean_of(out.values.values);
    return out;
}

KnnValues knn_i(std::span<const std::string> ids, const scoring::EmbeddingSet& embeddings,
                const KnnOptions& options) {
    std::vector<std::vector<double>> points;
    points.reserve(ids.size());
    for (const auto& id : ids) points.push_back(embeddings.at(id));
    return knn_i(ids, points, options);
}

}  // namespace instructmine::indicators
