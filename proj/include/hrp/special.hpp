#pragma once

#include <cstddef>
#include <vector>

namespace hrp {

// Regularized lower incomplete gamma P(a,x), absolute error <= 1e-13.
// Series expansion for x < a+1, Lentz continued fraction otherwise.
double gamma_p(double a, double x);

// Regularized upper incomplete gamma Q(a,x) = 1 - P(a,x).
double gamma_q(double a, double x);

// Chi-squared CDF / survival function with k degrees of freedom.
double chi2_cdf(double x, double k);
double chi2_sf(double x, double k);

// Asymptotic Kolmogorov tail: P(sup|B(t)| > t_stat) = 2 sum (-1)^{j-1} exp(-2 j^2 t^2).
double kolmogorov_sf(double t);

// One-sample Kolmogorov-Smirnov test against a CDF given as sorted
// probability-integral transforms u_(1) <= ... <= u_(n). Returns the
// asymptotic p-value; *stat_out (optional) receives D_n.
double ks_test_uniform(const std::vector<double>& sorted_u, double* stat_out = nullptr);

// log(sum(exp(x))) guarded against overflow; -inf on empty input.
double log_sum_exp(const std::vector<double>& x);

}  // namespace hrp
