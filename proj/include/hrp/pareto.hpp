#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "hrp/core.hpp"
#include "hrp/mvn.hpp"

namespace hrp {

struct ValueWithError {
    double value = 0.0;
    double abs_error = 0.0;
};

struct NormConstOptions {
    double tol = 1e-6;  // relative tolerance on the constant
    std::uint64_t seed = 0;
    long mvn_max_points = 200000;
};

// Normalization constant C_a(Q,l) of the Husler-Reiss Pareto density:
// a sum over faces of Gaussian CDF terms, evaluated in log space. The
// reported abs_error aggregates the CDF errors of all faces.
ValueWithError norm_const(const Threshold& a, const HrParams& p,
                          const NormConstOptions& opts = NormConstOptions{});

// log C_a(Q,l) together with its relative error.
struct LogNormConst {
    double log_value = 0.0;
    double rel_error = 0.0;
};
LogNormConst log_norm_const(const Threshold& a, const HrParams& p,
                            const NormConstOptions& opts = NormConstOptions{});

// Density evaluator with the normalization constant cached at construction.
class HrDensity {
  public:
    HrDensity(const Threshold& a, const HrParams& p,
              const NormConstOptions& opts = NormConstOptions{});

    // log f_a(z; Q, l); -inf when z is inside [0,a]. Errors:
    // NonPositiveComponent when some z_i <= 0.
    double logpdf(const Eigen::VectorXd& z) const;

    double log_norm() const { return log_c_.log_value; }
    const HrParams& params() const { return p_; }
    const Threshold& threshold() const { return a_; }

  private:
    Threshold a_;
    HrParams p_;
    LogNormConst log_c_;
};

double log_density(const Eigen::VectorXd& z, const Threshold& a, const HrParams& p,
                   const NormConstOptions& opts = NormConstOptions{});

// Angular decomposition on the max-norm unit sphere: face probabilities
// P(Theta in S_i) plus everything the recursive conditional sampler needs,
// cached once per parameter set (threshold 1_d implied).
struct FacePartition {
    Eigen::VectorXd probs;
    double prob_abs_error = 0.0;

    // Per-face reduced parameters (index i removed).
    std::vector<Eigen::MatrixXd> q_minus;
    std::vector<Eigen::VectorXd> l_minus;
    std::vector<Eigen::MatrixXd> chol_q_minus;  // lower Cholesky of Q_{-i}
    std::vector<Eigen::VectorXd> gauss_mean;    // Q_{-i}^{-1} l_{-i}
    std::vector<Eigen::MatrixXd> gauss_cov;     // Q_{-i}^{-1}

    // Recursive sampling cache; step t of face i samples component
    // order[i][t] from N(c0 - coef.row(t).G, sd[t]^2) conditioned <= 0.
    std::vector<std::vector<int>> order;
    std::vector<Eigen::VectorXd> cond_c0;
    std::vector<Eigen::MatrixXd> cond_coef;
    std::vector<Eigen::VectorXd> cond_sd;

    int dim() const { return static_cast<int>(probs.size()); }
};

FacePartition face_partition(const HrParams& p,
                             const NormConstOptions& opts = NormConstOptions{});

class Rng;

// One exact draw of the face-i Gaussian G conditioned on G <= 0. A recursive
// componentwise-inversion sweep proposes; the product of the later-step
// truncation probabilities accepts. Returns a d-vector with G[i] = 0.
Eigen::VectorXd sample_face_gaussian(const FacePartition& fp, int face, Rng& rng);

// Exact simulation from HRPar_a(Q,l). Routed through the standardized form
// (threshold 1_d, exponent 1): radius by Pareto inversion, face by its
// probability, angle by the recursive truncated-Gaussian scheme. Rows are
// seeded individually so any sharding reproduces the sequential output.
Eigen::MatrixXd sample(long n, const Threshold& a, const HrParams& p, std::uint64_t seed,
                       const NormConstOptions& opts = NormConstOptions{});

// Rows [row_begin, row_end) of the same sample (shard interface).
Eigen::MatrixXd sample_rows(long row_begin, long row_end, const Threshold& a,
                            const HrParams& p, std::uint64_t seed,
                            const NormConstOptions& opts = NormConstOptions{});

// Simulation from the generalized model via reduction to the standard one.
Eigen::MatrixXd sample_gen(long n, const Threshold& a, const GenHrParams& p,
                           std::uint64_t seed,
                           const NormConstOptions& opts = NormConstOptions{});

// Log-moments of Z ~ HRPar_a(Q,l), from finite differences of log C_a:
//   mean_log[i]  = d log C / d l_i
//   cov_log[i,j] = d^2 log C / d l_i d l_j
//   stat_mat     = gradient of log C along the centered-matrix directions,
//                  i.e. the mean of the matrix part of the sufficient statistic.
struct Moments {
    Eigen::VectorXd mean_log;
    Eigen::MatrixXd cov_log;
    Eigen::MatrixXd stat_mat;
};

Moments moments(const Threshold& a, const HrParams& p,
                const NormConstOptions& opts = NormConstOptions{});

// E[prod Z_i^{u_i}] = C_a(Q, l+u) / C_a(Q, l), defined for sum(u) < alpha.
// Errors: MomentDoesNotExist.
double fractional_moment(const Threshold& a, const HrParams& p, const Eigen::VectorXd& u,
                         const NormConstOptions& opts = NormConstOptions{});

// Natural parameters induced by a log-normal spectral profile LN(m, Sigma)
// with tail index alpha:
//   Q = S - S 1 1^T S / (1^T S 1),   S = Sigma^{-1}
//   l = S m - S 1 (alpha + m^T S 1) / (1^T S 1)
// The resulting exponent equals alpha exactly.
HrParams from_spectral(const Eigen::VectorXd& m, const Eigen::MatrixXd& sigma,
                       double alpha);

}  // namespace hrp
