// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace instructmine {

/// Derives an independent seed for a named sub-stream of a master seed, so
/// that every random decision in a run is a pure function of one `--seed`.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);

/// Seeded generator whose outputs are identical across standard libraries:
/// only the raw mt19937_64 sequence is used, never std distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t master, std::string_view stream) : engine_(derive_seed(master, stream)) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, n). n must be positive.
    std::size_t below(std::size_t n);

    /// Uniform real in [0, 1) with 53 random bits.
    double unit();

    /// Uniform real in (0, 1].
    double unit_open_left() { return 1.0 - unit(); }

    /// Standard normal via Box-Muller.
    double normal();

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// `count` distinct indices from [0, n), in draw order (partial Fisher-Yates).
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// 64-bit FNV-1a, used for fingerprints of reports and seed derivation.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace instructmine
