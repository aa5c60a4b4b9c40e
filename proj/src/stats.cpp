// SPDX-License-Identifier: Apache-2.0
#include "instructmine/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <set>

#include "instructmine/csv.hpp"
#include "instructmine/error.hpp"
#include "instructmine/special.hpp"
#include "instructmine/text.hpp"

namespace instructmine::stats {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
    return out;
}

bool is_ones(const Eigen::MatrixXd& x, Eigen::Index col) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        if (x(r, col) != 1.0) return false;
    }
    return true;
}

}  // namespace

// ---- observations -----------------------------------------------------------

std::string_view to_string(Series series) { return series == Series::random ? "random" : "hierarchical"; }

Series parse_series(std::string_view value) {
    const std::string key = text::lower_ascii(text::trim(value));
    if (key.empty() || key == "random") return Series::random;
    if (key == "hierarchical") return Series::hierarchical;
    throw DataError("unknown series \"" + std::string(value) + "\"");
}

std::vector<Observation> parse_observations(const std::string& contents, const std::string& source) {
    const auto rows = csv::parse(contents, source);
    if (rows.empty()) throw DataError(source + ": no header");
    const csv::Row& header = rows.front();

    std::map<std::string, std::size_t> at;
    for (std::size_t c = 0; c < header.size(); ++c) {
        std::string key = text::lower_ascii(text::trim(header[c]));
        if (!at.emplace(key, c).second) throw DataError(source + ": duplicate column \"" + key + "\"");
    }
    std::vector<std::string> required{"label", "loss"};
    for (auto i : indicators::kAllIndicators) required.emplace_back(indicators::column(i));
    std::vector<std::string> missing;
    for (const auto& r : required) {
        if (!at.count(r)) missing.push_back(r);
    }
    if (!missing.empty()) throw DataError(source + ": missing columns " + join_names(missing));
    for (const auto& [key, c] : at) {
        if (key != "series" && std::find(required.begin(), required.end(), key) == required.end()) {
            throw DataError(source + ": unknown column \"" + key + "\"");
        }
    }

    std::vector<Observation> out;
    std::set<std::string> labels;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::string where = source + " row " + std::to_string(r);
        if (row.size() != header.size()) {
            throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                            std::to_string(row.size()));
        }
        Observation obs;
        obs.label = std::string(text::trim(row[at["label"]]));
        if (obs.label.empty()) throw DataError(where + ": empty label");
        if (!labels.insert(obs.label).second) throw DataError(where + ": duplicate label \"" + obs.label + "\"");
        obs.loss = csv::parse_number(row[at["loss"]], where + " loss");
        if (!(obs.loss > 0.0) || !std::isfinite(obs.loss)) {
            throw DataError(where + ": loss must be positive and finite");
        }
        for (auto i : indicators::kAllIndicators) {
            const std::string col(indicators::column(i));
            obs.indicators[i] = csv::parse_number(row[at[col]], where + " " + col);
            if (!std::isfinite(obs.indicators[i])) throw DataError(where + ": " + col + " is not finite");
        }
        if (at.count("series")) obs.series = parse_series(row[at["series"]]);
        out.push_back(std::move(obs));
    }
    return out;
}

std::vector<Observation> read_observations(const std::filesystem::path& path) {
    return parse_observations(read_file(path), path.string());
}

std::string serialize_observations(std::span<const Observation> observations) {
    const bool with_series = std::any_of(observations.begin(), observations.end(),
                                         [](const Observation& o) { return o.series != Series::random; });
    csv::Row header{"label", "loss"};
    for (auto i : indicators::kAllIndicators) header.emplace_back(indicators::column(i));
    if (with_series) header.emplace_back("series");
    std::string out = csv::join(header) + "\n";
    for (const auto& o : observations) {
        csv::Row row{o.label, csv::number(o.loss)};
        for (auto i : indicators::kAllIndicators) row.push_back(csv::number(o.indicators[i]));
        if (with_series) row.emplace_back(to_string(o.series));
        out += csv::join(row) + "\n";
    }
    return out;
}

// ---- descriptive statistics ---------------------------------------------------

Json Summary::to_json() const {
    Json out;
    out["n"] = n;
    out["mean"] = number_or_null(mean);
    out["std"] = number_or_null(std);
    out["min"] = number_or_null(min);
    out["median"] = number_or_null(median);
    out["max"] = number_or_null(max);
    return out;
}

Summary describe(std::span<const double> values) {
    if (values.empty()) throw DataError("describe: no values");
    Summary s;
    s.n = values.size();
    s.mean = indicators::mean_of(values);
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    s.min = sorted.front();
    s.max = sorted.back();
    const std::size_t mid = s.n / 2;
    s.median = s.n % 2 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2.0;
    return s;
}

std::vector<std::pair<std::string, Summary>> describe(std::span<const Observation> observations) {
    if (observations.empty()) throw DataError("describe: no observations");
    std::vector<std::pair<std::string, Summary>> out;
    std::vector<double> column;
    for (const auto& o : observations) column.push_back(o.loss);
    out.emplace_back("Loss", describe(column));
    for (auto i : indicators::kAllIndicators) {
        column.clear();
        for (const auto& o : observations) column.push_back(o.indicators[i]);
        out.emplace_back(std::string(indicators::name(i)), describe(column));
    }
    return out;
}

// ---- ordinary least squares -------------------------------------------------

double RegressionFit::coefficient(std::string_view name) const {
    for (std::size_t j = 0; j < variables.size(); ++j) {
        if (variables[j] == name) return coefficients[j];
    }
    throw UsageError("no variable \"" + std::string(name) + "\" in fit");
}

bool RegressionFit::contains(std::string_view name) const {
    return std::find(variables.begin(), variables.end(), name) != variables.end();
}

Json RegressionFit::to_json(bool with_residuals) const {
    Json out;
    out["n"] = n;
    out["df_resid"] = df_resid;
    Json vars = Json::array();
    for (std::size_t j = 0; j < variables.size(); ++j) {
        Json v;
        v["name"] = variables[j];
        v["coef"] = number_or_null(coefficients[j]);
        v["std_err"] = number_or_null(std_errors[j]);
        v["t"] = number_or_null(t_values[j]);
        v["p"] = number_or_null(p_values[j]);
        vars.push_back(std::move(v));
    }
    out["variables"] = std::move(vars);
    out["r2"] = number_or_null(r2);
    out["adj_r2"] = number_or_null(adj_r2);
    out["f"] = number_or_null(f_statistic);
    out["prob_f"] = number_or_null(prob_f);
    out["loglik"] = number_or_null(log_likelihood);
    if (with_residuals) {
        Json res = Json::array();
        for (double r : residuals) res.push_back(number_or_null(r));
        out["residuals"] = std::move(res);
    }
    return out;
}

RegressionFit ols(std::span<const double> y, const Eigen::MatrixXd& x, const std::vector<std::string>& names) {
    const auto n = static_cast<Eigen::Index>(y.size());
    const Eigen::Index p = x.cols();
    if (x.rows() != n) throw UsageError("ols: X has " + std::to_string(x.rows()) + " rows for " +
                                        std::to_string(n) + " responses");
    if (static_cast<Eigen::Index>(names.size()) != p) throw UsageError("ols: one name per column required");
    if (p == 0) throw UsageError("ols: empty design");
    if (n <= p) {
        throw DataError("ols: " + std::to_string(n) + " observations cannot fit " + std::to_string(p) +
                        " parameters (need n > p)");
    }
    for (double v : y) {
        if (!std::isfinite(v)) throw DataError("ols: non-finite response");
    }
    if (!x.allFinite()) throw DataError("ols: non-finite design value");

    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < p) {
        std::vector<std::string> dependent;
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index j = qr.rank(); j < p; ++j) dependent.push_back(names[static_cast<std::size_t>(perm(j))]);
        throw DataError("ols: design is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                        std::to_string(p) + "); collinear columns: " + join_names(dependent));
    }

    RegressionFit fit;
    fit.variables = names;
    fit.n = static_cast<std::size_t>(n);
    fit.df_resid = static_cast<std::size_t>(n - p);
    for (Eigen::Index j = 0; j < p && !fit.has_intercept; ++j) fit.has_intercept = is_ones(x, j);

    const Eigen::VectorXd beta = qr.solve(yv);
    const Eigen::VectorXd resid = yv - x * beta;
    fit.rss = resid.squaredNorm();
    const double df = static_cast<double>(fit.df_resid);
    const double sigma2 = fit.rss / df;

    // diag((X'X)^-1) from R: (X'X)^-1 = P R^-1 R^-T P'.
    const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd r_inv =
        r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::VectorXd diag(p);
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index j = 0; j < p; ++j) diag(perm(j)) = r_inv.row(j).squaredNorm();

    for (Eigen::Index j = 0; j < p; ++j) {
        const double se = std::sqrt(sigma2 * diag(j));
        const double t = beta(j) / se;
        fit.coefficients.push_back(beta(j));
        fit.std_errors.push_back(se);
        fit.t_values.push_back(t);
        fit.p_values.push_back(student_t_two_sided_p(t, df));
    }
    fit.residuals.assign(resid.data(), resid.data() + n);

    const double nd = static_cast<double>(n);
    double tss = 0.0;
    if (fit.has_intercept) {
        const double mean = indicators::mean_of(y);
        for (double v : y) tss += (v - mean) * (v - mean);
    } else {
        for (double v : y) tss += v * v;
    }
    const double k_const = fit.has_intercept ? 1.0 : 0.0;
    fit.r2 = tss > 0.0 ? 1.0 - fit.rss / tss : kNaN;
    fit.adj_r2 = 1.0 - (nd - k_const) / df * (1.0 - fit.r2);
    const double df_model = static_cast<double>(p) - k_const;
    if (df_model > 0.0) {
        fit.f_statistic = ((tss - fit.rss) / df_model) / sigma2;
        fit.prob_f = f_upper_tail(fit.f_statistic, df_model, df);
    } else {
        fit.f_statistic = kNaN;
        fit.prob_f = kNaN;
    }
    fit.log_likelihood = -nd / 2.0 * (std::log(2.0 * std::numbers::pi) + std::log(fit.rss / nd) + 1.0);
    return fit;
}

Json StepwiseFit::to_json() const {
    Json out;
    out["alpha"] = alpha;
    out["full"] = full.to_json(false);
    Json steps = Json::array();
    for (const auto& s : trace) steps.push_back({{"dropped", s.variable}, {"p", number_or_null(s.p_value)}});
    out["trace"] = std::move(steps);
    out["final"] = fit.to_json(true);
    return out;
}

StepwiseFit stepwise(std::span<const double> y, const Eigen::MatrixXd& x, const std::vector<std::string>& names,
                     double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("stepwise: alpha must lie in [0, 1]");
    StepwiseFit out;
    out.alpha = alpha;
    out.full = ols(y, x, names);

    std::vector<Eigen::Index> kept(static_cast<std::size_t>(x.cols()));
    std::iota(kept.begin(), kept.end(), Eigen::Index{0});
    RegressionFit current = out.full;
    for (;;) {
        std::size_t worst = kept.size();
        double worst_p = -1.0;
        for (std::size_t j = 0; j < kept.size(); ++j) {
            if (is_ones(x, kept[j])) continue;
            const double p = std::isnan(current.p_values[j]) ? 1.0 : current.p_values[j];
            if (p > worst_p) {
                worst_p = p;
                worst = j;
            }
        }
        if (worst == kept.size() || worst_p <= alpha) break;
        out.trace.push_back({current.variables[worst], current.p_values[worst]});
        kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(worst));
        if (kept.empty()) break;

        Eigen::MatrixXd sub(x.rows(), static_cast<Eigen::Index>(kept.size()));
        std::vector<std::string> sub_names;
        for (std::size_t j = 0; j < kept.size(); ++j) {
            sub.col(static_cast<Eigen::Index>(j)) = x.col(kept[j]);
            sub_names.push_back(names[static_cast<std::size_t>(kept[j])]);
        }
        current = ols(y, sub, sub_names);
    }
    if (kept.empty()) throw DataError("stepwise: every column was eliminated; add an intercept column");
    out.fit = std::move(current);
    return out;
}

Design make_design(std::span<const Observation> observations, std::span<const indicators::Indicator> variables,
                   bool log_target) {
    Design d;
    const auto n = static_cast<Eigen::Index>(observations.size());
    d.x.resize(n, static_cast<Eigen::Index>(variables.size()) + 1);
    d.names.emplace_back(kInterceptName);
    for (auto v : variables) d.names.emplace_back(indicators::name(v));
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& o = observations[static_cast<std::size_t>(r)];
        if (!(o.loss > 0.0)) throw DataError("observation \"" + o.label + "\": loss must be positive");
        d.y.push_back(log_target ? std::log(o.loss) : o.loss);
        d.x(r, 0) = 1.0;
        for (std::size_t c = 0; c < variables.size(); ++c) {
            d.x(r, static_cast<Eigen::Index>(c) + 1) = o.indicators[variables[c]];
        }
    }
    return d;
}

// ---- Kolmogorov-Smirnov ---------------------------------------------------------

Reference Reference::fitted_normal() { return Reference{}; }

Reference Reference::normal(double mean, double sd) {
    if (!(sd > 0.0)) throw UsageError("normal reference: sd must be positive");
    Reference r;
    r.kind_ = Kind::normal;
    r.a_ = mean;
    r.b_ = sd;
    r.name_ = "normal(" + csv::number(mean) + "," + csv::number(sd) + ")";
    return r;
}

Reference Reference::uniform(double lo, double hi) {
    if (!(hi > lo)) throw UsageError("uniform reference: need lo < hi");
    Reference r;
    r.kind_ = Kind::uniform;
    r.a_ = lo;
    r.b_ = hi;
    r.name_ = "uniform(" + csv::number(lo) + "," + csv::number(hi) + ")";
    return r;
}

Reference Reference::custom(std::string name, std::function<double(double)> cdf) {
    if (!cdf) throw UsageError("custom reference: empty cdf");
    Reference r;
    r.kind_ = Kind::custom;
    r.name_ = std::move(name);
    r.cdf_ = std::move(cdf);
    return r;
}

std::function<double(double)> Reference::cdf_for(std::span<const double> values) const {
    switch (kind_) {
        case Kind::fitted_normal: {
            if (values.size() < 2) throw DataError("ks: a fitted normal needs at least two values");
            const Summary s = describe(values);
            if (!(s.std > 0.0)) throw DataError("ks: zero-variance sample against a normal reference");
            return [m = s.mean, sd = s.std](double v) { return normal_cdf((v - m) / sd); };
        }
        case Kind::normal:
            return [m = a_, sd = b_](double v) { return normal_cdf((v - m) / sd); };
        case Kind::uniform:
            return [lo = a_, hi = b_](double v) { return std::clamp((v - lo) / (hi - lo), 0.0, 1.0); };
        case Kind::custom:
            return cdf_;
    }
    return cdf_;
}

Json KsResult::to_json() const {
    Json out;
    out["variable"] = variable;
    out["n"] = n;
    out["reference"] = reference;
    out["statistic"] = number_or_null(statistic);
    out["p"] = number_or_null(p_value);
    return out;
}

double ks_statistic(std::span<const double> values, const std::function<double(double)>& cdf) {
    if (values.empty()) throw DataError("ks: no values");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = cdf(sorted[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

KsResult ks_test(std::span<const double> values, const Reference& reference, std::string variable) {
    if (values.empty()) throw DataError("ks: no values");
    for (double v : values) {
        if (!std::isfinite(v)) throw DataError("ks: non-finite value");
    }
    KsResult out;
    out.variable = std::move(variable);
    out.n = values.size();
    out.reference = reference.name();
    out.statistic = ks_statistic(values, reference.cdf_for(values));
    out.p_value = kolmogorov_survival(std::sqrt(static_cast<double>(out.n)) * out.statistic);
    return out;
}

// ---- univariate regression ----------------------------------------------------

BandPoint UnivariateFit::band(double at) const {
    const double fit = intercept + slope * at;
    const double dx = at - x_mean;
    const double half = t_crit * sigma * std::sqrt(1.0 / static_cast<double>(n) + dx * dx / sxx);
    return {fit, fit - half, fit + half};
}

Json UnivariateFit::to_json() const {
    Json out;
    out["variable"] = variable;
    out["series"] = series;
    out["n"] = n;
    out["slope"] = number_or_null(slope);
    out["intercept"] = number_or_null(intercept);
    out["r"] = number_or_null(r);
    out["sigma"] = number_or_null(sigma);
    out["confidence"] = confidence;
    out["t_crit"] = number_or_null(t_crit);
    return out;
}

UnivariateFit fit_univariate(std::span<const double> x, std::span<const double> y, double confidence) {
    if (x.size() != y.size()) throw UsageError("fit_univariate: x and y differ in length");
    if (x.size() < 3) throw DataError("fit_univariate: need at least three points");
    if (!(confidence > 0.0 && confidence < 1.0)) throw UsageError("fit_univariate: confidence outside (0, 1)");
    UnivariateFit f;
    f.n = x.size();
    f.confidence = confidence;
    f.x.assign(x.begin(), x.end());
    f.y.assign(y.begin(), y.end());
    f.x_mean = indicators::mean_of(x);
    const double y_mean = indicators::mean_of(y);
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < f.n; ++i) {
        const double dx = x[i] - f.x_mean;
        const double dy = y[i] - y_mean;
        f.sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(f.sxx > 0.0)) throw DataError("fit_univariate: the regressor is constant");
    f.slope = sxy / f.sxx;
    f.intercept = y_mean - f.slope * f.x_mean;
    f.r = syy > 0.0 ? sxy / std::sqrt(f.sxx * syy) : kNaN;
    double rss = 0.0;
    for (std::size_t i = 0; i < f.n; ++i) {
        const double e = y[i] - (f.intercept + f.slope * x[i]);
        rss += e * e;
    }
    const double dof = static_cast<double>(f.n - 2);
    f.sigma = std::sqrt(rss / dof);
    f.t_crit = student_t_quantile(0.5 + confidence / 2.0, dof);
    return f;
}

std::vector<UnivariateFit> fit_univariate(std::span<const Observation> observations, indicators::Indicator indicator,
                                          bool by_series, double confidence) {
    std::vector<UnivariateFit> out;
    for (Series s : {Series::random, Series::hierarchical}) {
        std::vector<double> xs;
        std::vector<double> ys;
        for (const auto& o : observations) {
            if (by_series && o.series != s) continue;
            if (!(o.loss > 0.0)) throw DataError("observation \"" + o.label + "\": loss must be positive");
            xs.push_back(o.indicators[indicator]);
            ys.push_back(std::log(o.loss));
        }
        if (by_series && xs.empty()) continue;
        UnivariateFit fit;
        try {
            fit = fit_univariate(xs, ys, confidence);
        } catch (const DataError& e) {
            throw DataError(std::string(indicators::name(indicator)) + ": " + e.what());
        }
        fit.variable = std::string(indicators::name(indicator));
        fit.series = by_series ? std::string(to_string(s)) : "all";
        out.push_back(std::move(fit));
        if (!by_series) break;
    }
    if (out.empty()) throw DataError("fit_univariate: no observations");
    return out;
}

}  // namespace instructmine::stats
