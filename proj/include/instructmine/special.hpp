// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace instructmine::stats {

/// Regularized incomplete beta I_x(a, b), continued fraction evaluation.
/// Relative accuracy is about 1e-13 in the tails used for p-values.
double incomplete_beta(double a, double b, double x);

double normal_cdf(double z);

double student_t_cdf(double t, double dof);

/// P(|T| >= |t|) for T ~ t(dof).
double student_t_two_sided_p(double t, double dof);

/// Inverse of student_t_cdf for p in (0, 1).
double student_t_quantile(double p, double dof);

/// P(F >= f) for F ~ F(d1, d2).
double f_upper_tail(double f, double d1, double d2);

/// Asymptotic Kolmogorov survival function Q(lambda) = P(K > lambda).
double kolmogorov_survival(double lambda);

}  // namespace instructmine::stats
