// SPDX-License-Identifier: Apache-2.0
#include "instructmine/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "instructmine/csv.hpp"
#include "instructmine/error.hpp"

namespace instructmine::report {

namespace {

constexpr double kWidth = 480.0;
constexpr double kHeight = 360.0;
constexpr double kMargin = 48.0;
constexpr std::array<const char*, 2> kColors{"#1f77b4", "#d62728"};

std::string fixed(double v, int digits = 2) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.*f", digits, v);
    return buffer;
}

std::string tick(double v) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.4g", v);
    return buffer;
}

struct Scale {
    double lo;
    double hi;
    double out_lo;
    double out_hi;
    double operator()(double v) const { return out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo); }
};

Scale padded(double lo, double hi, double out_lo, double out_hi) {
    double pad = (hi - lo) * 0.05;
    if (!(pad > 0.0)) pad = std::max(std::fabs(lo) * 0.05, 1e-6);
    return {lo - pad, hi + pad, out_lo, out_hi};
}

}  // namespace

Format parse_format(std::string_view text) {
    if (text == "csv") return Format::csv;
    if (text == "svg") return Format::svg;
    if (text == "both") return Format::both;
    throw UsageError("unknown report format \"" + std::string(text) + "\" (expected csv, svg or both)");
}

std::string points_csv(std::span<const stats::UnivariateFit> fits) {
    std::string out = "indicator,value,loss,fit,ci_lo,ci_hi\n";
    for (const auto& f : fits) {
        const std::string label = fits.size() > 1 ? f.variable + "[" + f.series + "]" : f.variable;
        for (std::size_t i = 0; i < f.x.size(); ++i) {
            const auto b = f.band(f.x[i]);
            out += csv::join({label, csv::number(f.x[i]), csv::number(f.y[i]), csv::number(b.fit),
                              csv::number(b.lo), csv::number(b.hi)}) +
                   "\n";
        }
    }
    return out;
}

std::string scatter_svg(std::span<const stats::UnivariateFit> fits) {
    if (fits.empty()) throw DataError("scatter: no fits");
    double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
    for (const auto& f : fits) {
        for (double v : f.x) x_lo = std::min(x_lo, v), x_hi = std::max(x_hi, v);
        for (double v : f.y) y_lo = std::min(y_lo, v), y_hi = std::max(y_hi, v);
        for (double v : {x_lo, x_hi}) {
            const auto b = f.band(v);
            y_lo = std::min(y_lo, b.lo);
            y_hi = std::max(y_hi, b.hi);
        }
    }
    const Scale sx = padded(x_lo, x_hi, kMargin, kWidth - kMargin / 2);
    const Scale sy = padded(y_lo, y_hi, kHeight - kMargin, kMargin / 2);

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"360\" viewBox=\"0 0 480 360\">\n";
    svg += "<rect width=\"480\" height=\"360\" fill=\"white\"/>\n";
    svg += "<title>" + fits.front().variable + " vs log loss</title>\n";
    const std::string x0 = fixed(kMargin), x1 = fixed(kWidth - kMargin / 2);
    const std::string y0 = fixed(kHeight - kMargin), y1 = fixed(kMargin / 2);
    svg += "<path d=\"M" + x0 + " " + y1 + " V" + y0 + " H" + x1 + "\" fill=\"none\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + x0 + "\" y=\"" + fixed(kHeight - kMargin + 16) + "\" font-size=\"10\">" + tick(x_lo) + "</text>\n";
    svg += "<text x=\"" + x1 + "\" y=\"" + fixed(kHeight - kMargin + 16) +
           "\" font-size=\"10\" text-anchor=\"end\">" + tick(x_hi) + "</text>\n";
    svg += "<text x=\"" + fixed(kMargin - 4) + "\" y=\"" + y0 + "\" font-size=\"10\" text-anchor=\"end\">" +
           tick(y_lo) + "</text>\n";
    svg += "<text x=\"" + fixed(kMargin - 4) + "\" y=\"" + fixed(kMargin / 2 + 8) +
           "\" font-size=\"10\" text-anchor=\"end\">" + tick(y_hi) + "</text>\n";
    svg += "<text x=\"" + fixed(kWidth / 2) + "\" y=\"" + fixed(kHeight - 8) +
           "\" font-size=\"12\" text-anchor=\"middle\">" + fits.front().variable + "</text>\n";
    svg += "<text x=\"14\" y=\"" + fixed(kHeight / 2) + "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
           fixed(kHeight / 2) + ")\">log loss</text>\n";

    constexpr int kGrid = 48;
    for (std::size_t s = 0; s < fits.size(); ++s) {
        const auto& f = fits[s];
        const char* color = kColors[s % kColors.size()];
        double lo = *std::min_element(f.x.begin(), f.x.end());
        double hi = *std::max_element(f.x.begin(), f.x.end());
        std::string upper, lower;
        for (int g = 0; g <= kGrid; ++g) {
            const double x = lo + (hi - lo) * g / kGrid;
            const auto b = f.band(x);
            upper += (g ? " L" : "M") + fixed(sx(x)) + " " + fixed(sy(b.hi));
        }
        for (int g = kGrid; g >= 0; --g) {
            const double x = lo + (hi - lo) * g / kGrid;
            lower += " L" + fixed(sx(x)) + " " + fixed(sy(f.band(x).lo));
        }
        svg += "<path d=\"" + upper + lower + " Z\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
        svg += "<line x1=\"" + fixed(sx(lo)) + "\" y1=\"" + fixed(sy(f.band(lo).fit)) + "\" x2=\"" + fixed(sx(hi)) +
               "\" y2=\"" + fixed(sy(f.band(hi).fit)) + "\" stroke=\"" + color + "\"/>\n";
        for (std::size_t i = 0; i < f.x.size(); ++i) {
            svg += "<circle cx=\"" + fixed(sx(f.x[i])) + "\" cy=\"" + fixed(sy(f.y[i])) + "\" r=\"2.5\" fill=\"" +
                   color + "\"/>\n";
        }
        svg += "<text x=\"" + fixed(kWidth - kMargin / 2) + "\" y=\"" + fixed(kMargin / 2 + 14.0 * (s + 1)) +
               "\" font-size=\"10\" text-anchor=\"end\" fill=\"" + color + "\">" + f.series +
               " r=" + fixed(f.r, 3) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

Json histograms(std::span<const stats::Observation> observations, std::size_t bins) {
    if (observations.empty()) throw DataError("histograms: no observations");
    if (bins == 0) throw UsageError("histograms: bins must be at least 1");
    Json out;
    out["bins"] = bins;
    Json per = Json::object();
    for (auto ind : indicators::kAllIndicators) {
        double lo = INFINITY, hi = -INFINITY;
        for (const auto& o : observations) lo = std::min(lo, o.indicators[ind]), hi = std::max(hi, o.indicators[ind]);
        std::vector<std::size_t> counts(bins, 0);
        const double width = (hi - lo) / static_cast<double>(bins);
        for (const auto& o : observations) {
            std::size_t b = width > 0.0 ? static_cast<std::size_t>((o.indicators[ind] - lo) / width) : 0;
            ++counts[std::min(b, bins - 1)];
        }
        std::vector<double> edges;
        for (std::size_t b = 0; b <= bins; ++b) edges.push_back(lo + width * static_cast<double>(b));
        per[std::string(indicators::name(ind))] = {{"edges", edges}, {"counts", counts}};
    }
    out["indicators"] = std::move(per);
    return out;
}

std::vector<Artifact> render(std::span<const stats::UnivariateFit> fits,
                             std::span<const stats::Observation> observations, Format format) {
    if (fits.empty()) throw DataError("report: no univariate results");
    std::vector<std::string> order;
    std::map<std::string, std::vector<stats::UnivariateFit>> by_variable;
    for (const auto& f : fits) {
        auto [it, fresh] = by_variable.try_emplace(f.variable);
        if (fresh) order.push_back(f.variable);
        it->second.push_back(f);
    }
    std::vector<Artifact> out;
    for (const auto& name : order) {
        const auto& group = by_variable[name];
        const std::string stem = std::string(indicators::column(indicators::parse_indicator(name)));
        if (format != Format::svg) out.push_back({stem + ".csv", points_csv(group)});
        if (format != Format::csv) out.push_back({stem + ".svg", scatter_svg(group)});
    }
    if (!observations.empty()) out.push_back({"histograms.json", histograms(observations).dump(2) + "\n"});
    return out;
}

std::vector<std::filesystem::path> write_all(const std::vector<Artifact>& artifacts,
                                             const std::filesystem::path& out_dir) {
    if (artifacts.empty()) throw DataError("report: nothing to write");
    std::vector<std::filesystem::path> paths;
    for (const auto& a : artifacts) {
        paths.push_back(out_dir / a.name);
        if (std::filesystem::exists(paths.back())) {
            throw DataError("refusing to overwrite existing output " + paths.back().string());
        }
    }
    for (std::size_t i = 0; i < artifacts.size(); ++i) write_new_file(paths[i], artifacts[i].contents);
    return paths;
}

}  // namespace instructmine::report
