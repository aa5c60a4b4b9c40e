// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <numbers>

// Eigen before fixtures: httplib pulls in <resolv.h>, whose _res macro breaks Eigen.
#include "instructmine/stats.hpp"
#include "instructmine/error.hpp"
#include "instructmine/special.hpp"
#include "fixtures.hpp"

using namespace instructmine;
using namespace instructmine::stats;
using doctest::Approx;

namespace {

bool rel_close(double a, double b, double tol) {
    if (a == b) return true;
    return std::fabs(a - b) <= tol * std::max(std::fabs(a), std::fabs(b));
}

Eigen::MatrixXd with_intercept(const std::vector<std::vector<double>>& cols) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(cols.front().size()), static_cast<Eigen::Index>(cols.size()) + 1);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        x(r, 0) = 1.0;
        for (std::size_t c = 0; c < cols.size(); ++c) x(r, static_cast<Eigen::Index>(c) + 1) = cols[c][r];
    }
    return x;
}

}  // namespace

// ---- special functions ------------------------------------------------------

TEST_CASE("incomplete beta against Boost") {
    for (double a : {0.5, 1.0, 2.5, 10.0, 37.0, 150.0}) {
        for (double b : {0.5, 1.0, 3.0, 20.0}) {
            for (double x : {1e-6, 0.01, 0.2, 0.5, 0.77, 0.99, 0.999999}) {
                const double ours = incomplete_beta(a, b, x);
                const double ref = boost::math::ibeta(a, b, x);
                INFO("a=" << a << " b=" << b << " x=" << x);
                CHECK(std::fabs(ours - ref) <= 1e-13 + 1e-10 * ref);
            }
        }
    }
    CHECK(incomplete_beta(2, 3, 0.0) == 0.0);
    CHECK(incomplete_beta(2, 3, 1.0) == 1.0);
    CHECK_THROWS_AS(incomplete_beta(0, 1, 0.5), UsageError);
}

TEST_CASE("t and F tails against Boost") {
    for (double dof : {1.0, 3.0, 10.0, 69.0, 74.0, 500.0}) {
        boost::math::students_t dist(dof);
        for (double t : {0.0, 0.1, 1.0, 1.96, 3.0, 8.0, 26.37, 60.0}) {
            const double ref = 2 * boost::math::cdf(boost::math::complement(dist, t));
            INFO("dof=" << dof << " t=" << t);
            CHECK(rel_close(student_t_two_sided_p(t, dof), ref, 1e-10));
            CHECK(rel_close(student_t_two_sided_p(-t, dof), ref, 1e-10));
            CHECK(rel_close(student_t_cdf(-t, dof), boost::math::cdf(dist, -t), 1e-10));
        }
        for (double p : {0.6, 0.9, 0.975, 0.995}) {
            CHECK(rel_close(student_t_quantile(p, dof), boost::math::quantile(dist, p), 1e-10));
            CHECK(rel_close(student_t_quantile(1 - p, dof), boost::math::quantile(dist, 1 - p), 1e-10));
        }
    }
    for (double d1 : {1.0, 3.0, 8.0}) {
        for (double d2 : {5.0, 69.0, 200.0}) {
            boost::math::fisher_f dist(d1, d2);
            for (double f : {0.1, 1.0, 4.0, 30.0, 350.0}) {
                INFO("d1=" << d1 << " d2=" << d2 << " f=" << f);
                CHECK(rel_close(f_upper_tail(f, d1, d2), boost::math::cdf(boost::math::complement(dist, f)), 1e-10));
            }
        }
    }
    boost::math::normal n01;
    for (double z : {-5.0, -1.0, 0.0, 0.3, 2.0}) CHECK(rel_close(normal_cdf(z), boost::math::cdf(n01, z), 1e-14));
}

TEST_CASE("kolmogorov survival") {
    // scipy.stats.kstwobign.sf reference values.
    CHECK(rel_close(kolmogorov_survival(0.5), 0.9639452436648751, 1e-12));
    CHECK(rel_close(kolmogorov_survival(1.0), 0.26999967167735456, 1e-12));
    CHECK(rel_close(kolmogorov_survival(1.36), 0.049485876755377876, 1e-12));
    CHECK(rel_close(kolmogorov_survival(2.5), 7.453306344157342e-06, 1e-10));
    CHECK(kolmogorov_survival(0.2) == Approx(1.0).epsilon(1e-12));
    CHECK(kolmogorov_survival(0.0) == 1.0);
    // Both series agree where they meet.
    const double lo = kolmogorov_survival(1.18 - 1e-12);
    const double hi = kolmogorov_survival(1.18);
    CHECK(std::fabs(lo - hi) < 1e-12);
}

// ---- describe -----------------------------------------------------------------

TEST_CASE("describe") {
    const auto s = describe(std::vector<double>{1, 2, 3});
    CHECK(s.mean == 2.0);
    CHECK(s.std == 1.0);
    CHECK(s.median == 2.0);
    const auto c = describe(std::vector<double>{4, 4, 4, 4});
    CHECK(c.std == 0.0);
    CHECK(c.min == 4.0);
    CHECK(c.median == 4.0);
    CHECK(c.max == 4.0);
    CHECK(describe(std::vector<double>{5, 1, 3, 2}).median == 2.5);
    CHECK_THROWS_AS(describe(std::vector<double>{}), DataError);

    // Welford streaming oracle.
    Rng rng(8);
    std::vector<double> v;
    for (int i = 0; i < 5000; ++i) v.push_back(1000 + 3 * rng.normal());
    double mean = 0;
    double m2 = 0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const double d = v[k] - mean;
        mean += d / static_cast<double>(k + 1);
        m2 += d * (v[k] - mean);
    }
    const auto d = describe(v);
    CHECK(rel_close(d.mean, mean, 1e-12));
    CHECK(rel_close(d.std, std::sqrt(m2 / (v.size() - 1)), 1e-12));
    CHECK(d.min == *std::min_element(v.begin(), v.end()));
    CHECK(d.max == *std::max_element(v.begin(), v.end()));
}

// ---- OLS ------------------------------------------------------------------------

TEST_CASE("ols: exact line") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y;
    for (double v : x) y.push_back(2 * v + 1);
    const auto f = ols(y, with_intercept({x}), {"const", "x"});
    CHECK(f.coefficients[0] == Approx(1.0).epsilon(1e-12));
    CHECK(f.coefficients[1] == Approx(2.0).epsilon(1e-12));
    CHECK(f.r2 == Approx(1.0).epsilon(1e-12));
    for (double r : f.residuals) CHECK(std::fabs(r) < 1e-12);
}

TEST_CASE("ols: matches statsmodels on a literal dataset") {
    const std::vector<double> x1{0.3, 1.2, 2.5, 3.1, 4.8, 5.0, 6.7, 7.2, 8.9, 9.4, 10.1, 11.6};
    const std::vector<double> x2{5.1, 3.3, 4.4, 1.2, 0.5, 2.8, 3.9, 1.7, 2.2, 0.9, 4.1, 3.0};
    const std::vector<double> y{1.9, 2.4, 4.1, 3.6, 4.9, 6.2, 7.8, 6.9, 8.8, 8.1, 10.9, 11.7};
    const auto f = ols(y, with_intercept({x1, x2}), {"const", "x1", "x2"});
    const std::vector<double> coef{0.13044428612690906, 0.8870305489302014, 0.3907222266531347};
    const std::vector<double> se{0.3607771504862173, 0.03363683467160435, 0.08360750847866437};
    const std::vector<double> t{0.36156471093335607, 26.370809191478934, 4.67329111658485};
    const std::vector<double> p{0.726020190606476, 7.832708514171367e-10, 0.001163170579775383};
    for (int j = 0; j < 3; ++j) {
        CHECK(rel_close(f.coefficients[j], coef[j], 1e-10));
        CHECK(rel_close(f.std_errors[j], se[j], 1e-10));
        CHECK(rel_close(f.t_values[j], t[j], 1e-10));
        CHECK(rel_close(f.p_values[j], p[j], 1e-8));
    }
    CHECK(rel_close(f.r2, 0.9873362208794841, 1e-12));
    CHECK(rel_close(f.adj_r2, 0.9845220477415917, 1e-12));
    CHECK(rel_close(f.f_statistic, 350.8441636319917, 1e-10));
    CHECK(rel_close(f.prob_f, 2.8942428670608725e-09, 1e-8));
    CHECK(rel_close(f.log_likelihood, -4.152788621444712, 1e-10));
    CHECK(f.df_resid == 9);
    CHECK(f.has_intercept);
    CHECK(f.coefficient("x2") == f.coefficients[2]);
    const Json j = f.to_json();
    CHECK(j["variables"][1]["name"] == "x1");
    for (const char* key : {"coef", "std_err", "t", "p"}) CHECK(j["variables"][0].contains(key));
    for (const char* key : {"r2", "adj_r2", "f", "prob_f", "loglik"}) CHECK(j.contains(key));
}

TEST_CASE("ols: invariants on random problems") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 20 + rng.below(60);
        const std::size_t p = 1 + rng.below(6);
        std::vector<std::vector<double>> cols(p, std::vector<double>(n));
        std::vector<std::string> names{"const"};
        for (std::size_t c = 0; c < p; ++c) {
            names.push_back("x" + std::to_string(c));
            for (auto& v : cols[c]) v = rng.normal(c, 1 + c);
        }
        std::vector<double> y(n);
        for (std::size_t r = 0; r < n; ++r) {
            y[r] = 0.5 + rng.normal();
            for (std::size_t c = 0; c < p; ++c) y[r] += 0.3 * cols[c][r];
        }
        const auto x = with_intercept(cols);
        const auto f = ols(y, x, names);
        for (std::size_t j = 0; j < f.coefficients.size(); ++j) {
            CHECK(f.t_values[j] == f.coefficients[j] / f.std_errors[j]);
        }
        CHECK(f.r2 >= 0.0);
        CHECK(f.r2 <= 1.0);
        CHECK(f.adj_r2 <= f.r2);
        double sum = 0;
        for (double r : f.residuals) sum += r;
        CHECK(std::fabs(sum) < 1e-9);
        const Eigen::Map<const Eigen::VectorXd> e(f.residuals.data(), static_cast<Eigen::Index>(n));
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            CHECK(std::fabs(x.col(c).dot(e)) < 1e-9 * (1 + x.col(c).norm() * e.norm()));
        }
        // Refit on fitted values.
        std::vector<double> fitted(n);
        for (std::size_t r = 0; r < n; ++r) fitted[r] = y[r] - f.residuals[r];
        const auto g = ols(fitted, x, names);
        CHECK(g.r2 == Approx(1.0).epsilon(1e-12));
        for (std::size_t j = 0; j < f.coefficients.size(); ++j) {
            CHECK(g.coefficients[j] == Approx(f.coefficients[j]).epsilon(1e-9).scale(1.0));
        }
        // stepwise with alpha = 1 keeps everything.
        const auto sw = stepwise(y, x, names, 1.0);
        CHECK(sw.trace.empty());
        CHECK(sw.fit.coefficients == f.coefficients);
        CHECK(sw.fit.p_values == f.p_values);
    }
}

TEST_CASE("ols: errors") {
    const std::vector<double> x{1, 2, 3, 4};
    std::vector<double> dup;
    for (double v : x) dup.push_back(3 * v);
    const std::vector<double> y{1, 3, 2, 5};
    try {
        ols(y, with_intercept({x, dup}), {"const", "a", "b"});
        FAIL("expected rank deficiency");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("collinear") != std::string::npos);
        CHECK((msg.find("a") != std::string::npos || msg.find("b") != std::string::npos));
    }
    CHECK_THROWS_AS(ols(std::vector<double>{1, 2}, with_intercept({{1.0, 2.0}}), {"const", "x"}), DataError);
    CHECK_THROWS_AS(ols(y, with_intercept({x}), {"const"}), UsageError);
}

// ---- stepwise -------------------------------------------------------------------

TEST_CASE("stepwise: null structure gives the intercept-only model") {
    Rng rng(31);
    const std::size_t n = 78;
    std::vector<double> y(n);
    for (auto& v : y) v = 1 + rng.normal();
    const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / n;
    std::vector<std::vector<double>> cols(8, std::vector<double>(n));
    std::vector<std::string> names{"const"};
    for (std::size_t c = 0; c < 8; ++c) {
        names.push_back("n" + std::to_string(c));
        for (auto& v : cols[c]) v = rng.normal();
        // Remove any sample correlation with y.
        double num = 0;
        double den = 0;
        for (std::size_t r = 0; r < n; ++r) {
            num += cols[c][r] * (y[r] - ybar);
            den += (y[r] - ybar) * (y[r] - ybar);
        }
        for (std::size_t r = 0; r < n; ++r) cols[c][r] -= num / den * (y[r] - ybar);
    }
    const auto sw = stepwise(y, with_intercept(cols), names);
    CHECK(sw.fit.variables == std::vector<std::string>{"const"});
    CHECK(sw.trace.size() == 8);
    CHECK(sw.fit.coefficients[0] == Approx(ybar).epsilon(1e-12));
}

TEST_CASE("stepwise: planted structure") {
    const std::vector<std::string> names{"const", "Len", "Rew", "PPL", "MTLD", "Knn6", "Nat", "Coh", "Und"};
    const std::vector<std::string> planted{"const", "Len", "Rew", "Knn6"};
    const std::size_t n = 78;
    int exact = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(derive_seed(41, "planted/" + std::to_string(seed)));
        std::vector<std::vector<double>> cols(8, std::vector<double>(n));
        for (auto& c : cols) {
            for (auto& v : c) v = rng.normal();
        }
        std::vector<double> y(n);
        for (std::size_t r = 0; r < n; ++r) y[r] = 1 + 2 * cols[1][r] - 1.5 * cols[0][r] + cols[4][r] + 0.3 * rng.normal();
        const auto sw = stepwise(y, with_intercept(cols), names);
        for (const auto& v : planted) CHECK(sw.fit.contains(v));
        for (const auto& step : sw.trace) CHECK(step.p_value > 0.05);
        for (const auto& p : sw.fit.p_values) CHECK(p <= 0.05);
        CHECK(sw.trace.size() + sw.fit.variables.size() == names.size());
        CHECK(sw.to_json()["trace"].size() == sw.trace.size());
        exact += sw.fit.variables == planted;
    }
    // Each null predictor survives with probability about alpha.
    CHECK(exact >= 10);
}

// ---- KS -------------------------------------------------------------------------

TEST_CASE("ks statistic") {
    CHECK(ks_statistic(std::vector<double>{0.5}, [](double x) { return x; }) == 0.5);
    const auto r = ks_test(std::vector<double>{0.5}, Reference::uniform(0, 1));
    CHECK(r.statistic == 0.5);

    // Brute-force oracle: compare the empirical CDF and its left limit with F at every sample point.
    Rng rng(51);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(5 + rng.below(200));
        for (auto& x : v) x = std::round(rng.normal() * 4) / 4;  // ties included
        auto cdf = [](double x) { return normal_cdf(x / 1.3); };
        double sup = 0;
        for (double p : v) {
            double le = 0;
            double lt = 0;
            for (double q : v) {
                le += q <= p;
                lt += q < p;
            }
            sup = std::max({sup, std::fabs(le / v.size() - cdf(p)), std::fabs(lt / v.size() - cdf(p))});
        }
        CHECK(std::fabs(ks_statistic(v, cdf) - sup) <= 1e-12);
    }
}

TEST_CASE("ks test behaviour") {
    Rng rng(61);
    std::vector<double> v(100000);
    for (auto& x : v) x = rng.normal(3, 2);
    const auto big = ks_test(v, Reference::fitted_normal(), "x");
    CHECK(big.statistic < 0.01);
    CHECK(big.variable == "x");

    std::vector<double> small(200);
    for (auto& x : small) x = rng.normal();
    const auto a = ks_test(small, Reference::normal(0, 1));
    std::vector<double> transformed;
    for (double x : small) transformed.push_back(std::exp(x));
    const auto b = ks_test(transformed, Reference::custom("lognormal", [](double x) {
                               return x <= 0 ? 0.0 : normal_cdf(std::log(x));
                           }));
    CHECK(std::fabs(a.statistic - b.statistic) < 1e-12);
    CHECK(a.p_value == Approx(kolmogorov_survival(std::sqrt(200.0) * a.statistic)));
    CHECK(a.p_value > 0.01);

    std::vector<double> skewed;
    for (int i = 0; i < 500; ++i) skewed.push_back(std::exp(2 * rng.normal()));
    CHECK(ks_test(skewed).p_value < 1e-6);

    CHECK_THROWS_AS(ks_test(std::vector<double>{2, 2, 2}), DataError);
    CHECK_THROWS_AS(ks_test(std::vector<double>{}), DataError);
    CHECK_THROWS_AS(ks_test(std::vector<double>{1.0}), DataError);
}

// ---- univariate -----------------------------------------------------------------

TEST_CASE("univariate: exact line") {
    const std::vector<double> x{0, 1, 2, 3, 4};
    std::vector<double> y;
    for (double v : x) y.push_back(-v + 3);
    const auto f = fit_univariate(x, y);
    CHECK(f.slope == Approx(-1.0).epsilon(1e-12));
    CHECK(f.intercept == Approx(3.0).epsilon(1e-12));
    CHECK(f.r == Approx(-1.0).epsilon(1e-12));
    const auto b = f.band(f.x_mean);
    CHECK(b.hi - b.lo == Approx(0.0).scale(1.0));
}

TEST_CASE("univariate: band closed form") {
    Rng rng(71);
    std::vector<double> x(30);
    std::vector<double> y(30);
    for (std::size_t i = 0; i < 30; ++i) {
        x[i] = rng.unit() * 10;
        y[i] = 0.5 * x[i] + rng.normal();
    }
    const auto f = fit_univariate(x, y);
    const double t = boost::math::quantile(boost::math::students_t(28), 0.975);
    const auto at_mean = f.band(f.x_mean);
    CHECK((at_mean.hi - at_mean.fit) == Approx(t * f.sigma * std::sqrt(1.0 / 30)).epsilon(1e-10));
    const auto far = f.band(f.x_mean + 4);
    CHECK(far.hi - far.lo > at_mean.hi - at_mean.lo);

    // Same numbers as the general OLS path.
    const auto g = ols(y, with_intercept({x}), {"const", "x"});
    CHECK(f.slope == Approx(g.coefficients[1]).epsilon(1e-12));
    CHECK(f.intercept == Approx(g.coefficients[0]).epsilon(1e-12));
    CHECK(f.r * f.r == Approx(g.r2).epsilon(1e-12));

    CHECK_THROWS_AS(fit_univariate(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), DataError);
    CHECK_THROWS_AS(fit_univariate(std::vector<double>{1, 2}, std::vector<double>{1, 2}), DataError);
}

TEST_CASE("univariate per series and observation files") {
    std::vector<Observation> obs;
    Rng rng(81);
    for (int i = 0; i < 24; ++i) {
        Observation o;
        o.label = "d" + std::to_string(i);
        o.series = i % 2 ? Series::hierarchical : Series::random;
        for (auto ind : indicators::kAllIndicators) o.indicators[ind] = rng.unit();
        o.loss = std::exp(1 - 0.5 * o.indicators[indicators::Indicator::rew] + 0.01 * rng.normal());
        obs.push_back(o);
    }
    const auto fits = fit_univariate(obs, indicators::Indicator::rew);
    REQUIRE(fits.size() == 2);
    CHECK(fits[0].series == "random");
    CHECK(fits[1].series == "hierarchical");
    CHECK(fits[0].n == 12);
    CHECK(fits[0].slope < 0);
    CHECK(fit_univariate(obs, indicators::Indicator::rew, false).front().n == 24);

    const std::string csv = serialize_observations(obs);
    CHECK(csv.substr(0, csv.find('\n')) == "label,loss,len,rew,ppl,mtld,knn6,nat,coh,und,series");
    const auto back = parse_observations(csv);
    REQUIRE(back.size() == obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        CHECK(back[i].label == obs[i].label);
        CHECK(back[i].loss == obs[i].loss);
        CHECK(back[i].indicators.values == obs[i].indicators.values);
        CHECK(back[i].series == obs[i].series);
    }
    for (auto& o : obs) o.series = Series::random;
    const std::string plain = serialize_observations(obs);
    CHECK(plain.substr(0, plain.find('\n')) == "label,loss,len,rew,ppl,mtld,knn6,nat,coh,und");

    const std::string header = "label,loss,len,rew,ppl,mtld,knn6,nat,coh,und\n";
    CHECK_THROWS_AS(parse_observations(header + "a,0,1,1,1,1,1,1,1,1\n"), DataError);
    CHECK_THROWS_AS(parse_observations(header + "a,1,1,1,1,1,1,1,1\n"), DataError);
    CHECK_THROWS_AS(parse_observations(header + "a,1,1,1,x,1,1,1,1,1\n"), DataError);
    CHECK_THROWS_AS(parse_observations(header + "a,1,1,1,1,1,1,1,1,1\na,1,1,1,1,1,1,1,1,1\n"), DataError);
    CHECK_THROWS_AS(parse_observations("label,loss\n"), DataError);
    CHECK(parse_observations(header + "\"a,b\",1.5,1,2,3,4,5,0.1,0.2,0.3\n").front().label == "a,b");
}

TEST_CASE("design matrix") {
    std::vector<Observation> obs(3);
    for (int i = 0; i < 3; ++i) {
        obs[i].label = std::to_string(i);
        obs[i].loss = i + 1.0;
        obs[i].indicators[indicators::Indicator::rew] = 10.0 * i;
    }
    const std::vector<indicators::Indicator> vars{indicators::Indicator::rew};
    const auto d = make_design(obs, vars);
    CHECK(d.names == std::vector<std::string>{"const", "Rew"});
    CHECK(d.y[2] == std::log(3.0));
    CHECK(d.x(2, 1) == 20.0);
    CHECK(make_design(obs, vars, false).y[2] == 3.0);
}
