#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace hrp {

// Standard normal CDF, absolute error below 1e-15 (erfc based).
double std_normal_cdf(double x);

// Standard normal density.
double std_normal_pdf(double x);

// log Phi(x), stable in the far left tail (asymptotic expansion).
double std_normal_logcdf(double x);

// Inverse standard normal CDF for p in (0,1). Wichura's PPND16 (AS 241);
// |Phi(result) - p| stays well below 1e-12 over the whole range.
double std_normal_quantile(double p);

// Bivariate standard normal P(X <= h, Y <= k) with correlation rho.
// Genz's rewrite of Drezner-Wesolowsky; absolute error about 5e-16.
double bvn_cdf(double h, double k, double rho);

struct MvnSpec {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    Eigen::VectorXd upper;
};

struct CdfEstimate {
    double value = 0.0;
    double abs_error = 0.0;
    long n_points = 0;
    // false when the requested tolerance was not reached within the point
    // budget; the estimate is still the best one available.
    bool converged = true;
};

struct MvnOptions {
    double tol = 1e-6;
    // optional second stopping rule: err <= rel_tol * value (0 disables);
    // lets callers target the relative accuracy of weighted CDF sums without
    // paying absolute accuracy on near-zero terms
    double rel_tol = 0.0;
    long max_points = 200000;  // per replicate
    int n_replicates = 12;
    std::uint64_t seed = 0;
};

// P(X <= upper) for X ~ N(mean, cov).
//   k = 0  -> exactly 1 (empty product)
//   k = 1  -> Phi, exact
//   k = 2  -> bvn_cdf, deterministic (error ~1e-15); keeps finite-difference
//             derivatives of downstream quantities noise-free
//   k >= 3 -> randomized QMC on the Genz separation-of-variables transform
//             with truncation-ordered Cholesky; abs_error is a ~99% bound
//             from the replicate spread. Deterministic given options.seed.
CdfEstimate mvn_cdf(const MvnSpec& spec, const MvnOptions& opts = MvnOptions{});

}  // namespace hrp
