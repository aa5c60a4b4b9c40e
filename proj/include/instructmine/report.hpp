// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "instructmine/json.hpp"
#include "instructmine/stats.hpp"

namespace instructmine::report {

enum class Format { csv, svg, both };

/// "csv", "svg" or "both"; anything else is a UsageError.
Format parse_format(std::string_view text);

struct Artifact {
    std::filesystem::path name;  // relative to the output directory
    std::string contents;
};

/// Points of one indicator with the fitted line and band evaluated at each
/// point. Columns: indicator, value, loss, fit, ci_lo, ci_hi; loss, fit and
/// band are in log-loss units. With more than one series the indicator
/// field carries the series as "Name[series]".
std::string points_csv(std::span<const stats::UnivariateFit> fits);

/// Scatter of log-loss against the indicator with each series' line and band.
std::string scatter_svg(std::span<const stats::UnivariateFit> fits);

/// Equal-width histogram of each indicator across observations.
Json histograms(std::span<const stats::Observation> observations, std::size_t bins = 20);

/// Every artifact for a set of univariate fits: one CSV and/or SVG per
/// indicator plus histograms.json. Throws DataError when `fits` is empty.
std::vector<Artifact> render(std::span<const stats::UnivariateFit> fits,
                             std::span<const stats::Observation> observations, Format format);

/// Writes all artifacts or none: every target is checked before the first
/// write. Returns the written paths.
std::vector<std::filesystem::path> write_all(const std::vector<Artifact>& artifacts,
                                             const std::filesystem::path& out_dir);

}  // namespace instructmine::report
