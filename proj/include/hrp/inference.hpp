#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hrp/core.hpp"
#include "hrp/pareto.hpp"

namespace hrp {

// Summary statistics of an exceedance sample.
struct SampleStats {
    long n = 0;
    SufficientStat tbar;   // sample-averaged sufficient statistic
    Eigen::MatrixXd vn;    // covariance matrix of log z across rows
    Eigen::VectorXd nn;    // per-margin exceedance fraction of z/a above 1
    Eigen::VectorXd on;    // per-margin truncated mean of log(z/a)
};

// Errors: RowInsideThreshold when a row lies entirely inside [0,a],
// NonPositiveComponent, EmptySample.
SampleStats sample_stats(const Eigen::MatrixXd& sample, const Threshold& a);

// MLE existence criterion: the restriction of Vn to the complement of
// span(1_d) must be positive definite.
struct ExistenceDiagnostic {
    bool exists = false;
    double min_eigenvalue = 0.0;  // smallest eigenvalue of the restriction
    double threshold = 0.0;       // 1e-10 * trace(Vn)
};

ExistenceDiagnostic existence_check(const SampleStats& stats);

enum class ModelKind { Standard, Generalized };

struct FitReport {
    ModelKind model = ModelKind::Standard;
    std::optional<HrParams> hr;
    std::optional<GenHrParams> gen;
    Threshold threshold = Threshold::ones(2);
    double loglik = 0.0;             // total log-likelihood of the sample
    Eigen::MatrixXd info;            // observed information, PSD-projected
    Eigen::VectorXd std_errors;      // sqrt(diag(info^{-1})) / sqrt(n) scaling folded in
    bool converged = false;
    int iterations = 0;
    double gradient_norm = 0.0;      // score residual at the returned point
    std::vector<double> neg_loglik_trace;  // generalized fit: one entry per half-step
};

struct FitOptions {
    double tol = 1e-6;        // score residual norm in parameter-space coordinates
    int max_iters = 500;
    double tol_ll = 1e-9;     // per-observation objective decrease cutoff (times n)
    int max_alt_iters = 200;
    double mvn_tol = 1e-8;    // CDF tolerance during differentiation
    std::uint64_t seed = 0;
    bool compute_info = true;
    // Extra alternating-scheme starting point; the better optimum is kept.
    std::optional<GenHrParams> extra_init;
};

// Maximum likelihood fit of the standard model. The data are standardized to
// threshold 1_d, the concave log-likelihood is maximized over the chart
// (log-Cholesky of the complement restriction of Q, free l) by quasi-Newton
// ascent, and the result is transformed back to threshold a. Convergence is
// declared on the score-equation residual. Errors: NoMle. A budget-exhausted
// run returns converged = false.
FitReport fit_hr(const Eigen::MatrixXd& sample, const Threshold& a,
                 const FitOptions& opts = FitOptions{});

// Moment-based initializer for the generalized model: alpha_j = N_j / O_j,
// then a standard fit on (z/a)^alpha, renormalized to l.1 = -1. Errors:
// MarginNotExceeded. Returned parameters refer to threshold a.
GenHrParams moment_init(const Eigen::MatrixXd& sample, const Threshold& a,
                        const FitOptions& opts = FitOptions{});

// Alternating maximization of the generalized likelihood: a Newton block in
// alpha (concave) alternates with a standard fit in (Q,l) on z^alpha. The
// negative log-likelihood is nonincreasing across half-steps; the trace is
// recorded in the report. Errors: NoMle, MarginNotExceeded; NotConverged is
// reported through the flag.
FitReport fit_gen(const Eigen::MatrixXd& sample, const Threshold& a,
                  const FitOptions& opts = FitOptions{});

struct LrtResult {
    double stat = 0.0;  // 2 (loglik_gen - loglik_hr), clipped at 0
    int df = 0;         // d - 1
    double p_value = 1.0;
    FitReport fit_null;  // standard model
    FitReport fit_alt;   // generalized model
};

// Likelihood ratio test of equal tail indices across margins.
LrtResult lrt_equal_alpha(const Eigen::MatrixXd& sample, const Threshold& a,
                          const FitOptions& opts = FitOptions{});

// Expected per-observation information of the standard model: the Hessian of
// log C_a over ParamVector coordinates (equal to Var T), PSD-projected.
Eigen::MatrixXd fisher_info_hr(const HrParams& p, const Threshold& a,
                               const FitOptions& opts = FitOptions{});

// Monte Carlo estimate of the generalized-model information as the score
// outer product E[dl dl^T], with entrywise standard errors. Coordinates:
// [alpha_1..alpha_d, A-part coordinates, l-hyperplane coordinates].
struct GenInfoEstimate {
    Eigen::MatrixXd info;
    Eigen::MatrixXd std_error;
};

GenInfoEstimate fisher_info_gen(const GenHrParams& p, const Threshold& a, long n_draws,
                                std::uint64_t seed,
                                const FitOptions& opts = FitOptions{});

// Total log-likelihood of a sample under each model (threshold a).
double loglik_hr(const Eigen::MatrixXd& sample, const Threshold& a, const HrParams& p,
                 const FitOptions& opts = FitOptions{});
double loglik_gen(const Eigen::MatrixXd& sample, const Threshold& a, const GenHrParams& p,
                  const FitOptions& opts = FitOptions{});

}  // namespace hrp
