// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "instructmine/indicators.hpp"
#include "instructmine/json.hpp"

namespace instructmine::stats {

// ---- observations -----------------------------------------------------------

/// Which sampling scheme produced a dataset; univariate fits run per series.
enum class Series { random, hierarchical };

std::string_view to_string(Series series);
Series parse_series(std::string_view text);

/// One finetuned dataset: its indicator vector and the externally measured
/// evaluation loss of the model trained on it.
struct Observation {
    std::string label;
    double loss = 0.0;
    indicators::IndicatorVector indicators;
    Series series = Series::random;
};

/// CSV with header label,loss,len,rew,ppl,mtld,knn6,nat,coh,und and an
/// optional trailing series column. Columns may come in any order.
std::vector<Observation> parse_observations(const std::string& csv, const std::string& source = "observations");
std::vector<Observation> read_observations(const std::filesystem::path& path);
std::string serialize_observations(std::span<const Observation> observations);

// ---- descriptive statistics ---------------------------------------------------

struct Summary {
    std::size_t n = 0;
    double mean = 0.0;
    double std = 0.0;  // n - 1 denominator; 0 for a single value
    double min = 0.0;
    double median = 0.0;
    double max = 0.0;

    Json to_json() const;
};

Summary describe(std::span<const double> values);

/// "Loss" followed by the eight indicators, in column order.
std::vector<std::pair<std::string, Summary>> describe(std::span<const Observation> observations);

// ---- ordinary least squares -------------------------------------------------

struct RegressionFit {
    std::vector<std::string> variables;
    std::vector<double> coefficients;
    std::vector<double> std_errors;
    std::vector<double> t_values;
    std::vector<double> p_values;
    double r2 = 0.0;
    double adj_r2 = 0.0;
    double f_statistic = 0.0;
    double prob_f = 0.0;
    double log_likelihood = 0.0;
    double rss = 0.0;
    std::vector<double> residuals;
    std::size_t n = 0;
    std::size_t df_resid = 0;
    bool has_intercept = false;

    /// Coefficient by variable name; throws UsageError when absent.
    double coefficient(std::string_view name) const;
    bool contains(std::string_view name) const;
    Json to_json(bool with_residuals = true) const;
};

/// Name used for the all-ones column.
inline constexpr std::string_view kInterceptName = "const";

/// OLS via column-pivoted Householder QR. A column equal to 1 everywhere is
/// treated as the intercept (centred R2, F over the other columns).
/// Throws DataError when n <= p or when X is rank deficient, naming the
/// columns that depend on the others.
RegressionFit ols(std::span<const double> y, const Eigen::MatrixXd& x, const std::vector<std::string>& names);

struct EliminationStep {
    std::string variable;
    double p_value;  // p of the dropped variable in the model it was dropped from
};

struct StepwiseFit {
    RegressionFit full;
    RegressionFit fit;
    std::vector<EliminationStep> trace;
    double alpha = 0.05;

    Json to_json() const;
};

/// Backward elimination: drop the non-intercept variable with the largest
/// p-value above `alpha`, refit, repeat. A NaN p-value counts as 1.
StepwiseFit stepwise(std::span<const double> y, const Eigen::MatrixXd& x, const std::vector<std::string>& names,
                     double alpha = 0.05);

/// Regression inputs assembled from observations: y is log(loss) unless
/// `log_target` is false; X holds an intercept and the requested indicators.
struct Design {
    std::vector<double> y;
    Eigen::MatrixXd x;
    std::vector<std::string> names;
};

Design make_design(std::span<const Observation> observations,
                   std::span<const indicators::Indicator> variables = indicators::kAllIndicators,
                   bool log_target = true);

// ---- Kolmogorov-Smirnov ---------------------------------------------------------

/// Reference distribution for a one-sample KS test.
class Reference {
public:
    /// Normal with the sample mean and (n - 1) standard deviation.
    static Reference fitted_normal();
    static Reference normal(double mean, double sd);
    static Reference uniform(double lo, double hi);
    static Reference custom(std::string name, std::function<double(double)> cdf);

    const std::string& name() const { return name_; }
    /// The CDF to test against; fitted references estimate from `values`.
    std::function<double(double)> cdf_for(std::span<const double> values) const;

private:
    enum class Kind { fitted_normal, normal, uniform, custom };
    Kind kind_ = Kind::fitted_normal;
    double a_ = 0.0;
    double b_ = 1.0;
    std::string name_ = "normal(fitted)";
    std::function<double(double)> cdf_;
};

struct KsResult {
    std::string variable;
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    std::string reference;

    Json to_json() const;
};

/// sup |F_n - F| over the sample: at each order statistic both the gap just
/// before and at the step are checked.
double ks_statistic(std::span<const double> values, const std::function<double(double)>& cdf);

/// Statistic plus the asymptotic Kolmogorov p-value Q(sqrt(n) D). Throws
/// DataError on an empty sample, and on a fitted normal with fewer than two
/// values or zero variance.
KsResult ks_test(std::span<const double> values, const Reference& reference = Reference::fitted_normal(),
                 std::string variable = {});

// ---- univariate regression ----------------------------------------------------

struct BandPoint {
    double fit;
    double lo;
    double hi;
};

struct UnivariateFit {
    std::string variable;
    std::string series;
    std::size_t n = 0;
    double slope = 0.0;
    double intercept = 0.0;
    double r = 0.0;
    double sigma = 0.0;  // residual standard error, n - 2 dof
    double x_mean = 0.0;
    double sxx = 0.0;
    double confidence = 0.95;
    double t_crit = 0.0;
    std::vector<double> x;
    std::vector<double> y;

    /// Fitted mean response at `at` with its pointwise confidence interval.
    BandPoint band(double at) const;
    Json to_json() const;
};

/// Simple regression of y on x with a confidence band for the mean response.
/// Needs at least three points; a constant x is a DataError.
UnivariateFit fit_univariate(std::span<const double> x, std::span<const double> y, double confidence = 0.95);

/// log(loss) against one indicator, one fit per series present.
std::vector<UnivariateFit> fit_univariate(std::span<const Observation> observations, indicators::Indicator indicator,
                                          bool by_series = true, double confidence = 0.95);

}  // namespace instructmine::stats
