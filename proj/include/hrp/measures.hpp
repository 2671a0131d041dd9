#pragma once

#include <cstdint>
#include <optional>
#include <variant>

#include <Eigen/Dense>

#include "hrp/core.hpp"
#include "hrp/pareto.hpp"

namespace hrp {

// Spectral laws of the radius-times-spectral-vector construction. Each one
// selects a classical extreme value dependence family: Gaussian -> extremal-t,
// log-normal -> Husler-Reiss, Frechet -> logistic, Weibull -> negative
// logistic, Gamma -> Dirichlet.
struct GaussianSpec {
    Eigen::MatrixXd sigma;
};
struct LogNormalSpec {
    Eigen::VectorXd m;
    Eigen::MatrixXd sigma;
};
struct FrechetSpec {
    Eigen::VectorXd lambda;
    double beta;
};
struct WeibullSpec {
    Eigen::VectorXd lambda;
    double beta;
};
struct GammaSpec {
    Eigen::VectorXd theta;  // shape
    Eigen::VectorXd beta;   // rate
};

using SpectralFamily =
    std::variant<GaussianSpec, LogNormalSpec, FrechetSpec, WeibullSpec, GammaSpec>;

// Derived data of the log-normal family: the induced natural parameters and
// the density constant, recomputed from (m, Sigma, alpha) and checked once
// against direct quadrature of the defining mixture integral.
struct LogNormalDerived {
    HrParams params;
    double log_c;
};

// Limit measure of R*Z with R heavy tailed of index alpha > 0 and spectral
// vector Z from one of the five families. Validates the family parameters at
// construction (positive definiteness, positive scales/shapes).
class MeasureModel {
  public:
    MeasureModel(SpectralFamily family, double alpha);

    const SpectralFamily& family() const { return family_; }
    double alpha() const { return alpha_; }
    int dim() const { return dim_; }

    // Only present for the log-normal family.
    const std::optional<LogNormalDerived>& lognormal() const { return ln_; }

  private:
    SpectralFamily family_;
    double alpha_;
    int dim_;
    std::optional<LogNormalDerived> ln_;
    Eigen::MatrixXd chol_;  // Cholesky of sigma for Gaussian / log-normal sampling
    friend Eigen::MatrixXd breiman_sample(const MeasureModel&, long, std::uint64_t,
                                          const std::optional<Eigen::VectorXd>&);
};

struct MeasureMcOptions {
    long n_draws = 1000000;
    std::uint64_t seed = 0;
};

// Density of the limit measure at z (homogeneous of order -d-alpha).
// Support: any nonzero z for the Gaussian family, strictly positive z for
// the others. Errors: OutOfSupport, ConstraintViolation (Frechet needs
// beta > alpha, Weibull needs alpha > beta).
double lambda_density(const MeasureModel& model, const Eigen::VectorXd& z);

// Tail function V(x) = Lambda([0,x]^c) = E[max_i (Z_i/x_i)_+^alpha], x > 0.
// Closed form for Frechet/Weibull; Gaussian CDF sum for log-normal (shares
// the norm_const face decomposition); Monte Carlo with reported standard
// error for Gaussian/Gamma.
ValueWithError tail_V(const MeasureModel& model, const Eigen::VectorXd& x,
                      const MeasureMcOptions& mc = MeasureMcOptions{});

// Extreme value copula C_V(u) = exp(-V(sigma_1 (-log u_1)^{-1/alpha}, ...))
// with sigma_i^alpha = E[(Z_i)_+^alpha] (closed form for every family).
double ev_copula(const MeasureModel& model, const Eigen::VectorXd& u,
                 const MeasureMcOptions& mc = MeasureMcOptions{});

// n independent draws of X = R Z, R an alpha-Pareto radius (P(R>r) = r^{-alpha}),
// sampled by inversion. When nonstandard_alpha is given, R is 1-Pareto and
// X_i = R^{1/alpha_i} Z_i. Rows carry derived seeds, so sharding by rows
// reproduces the sequential output.
Eigen::MatrixXd breiman_sample(const MeasureModel& model, long n, std::uint64_t seed,
                               const std::optional<Eigen::VectorXd>& nonstandard_alpha =
                                   std::nullopt);

// Tail-ratio estimator: the fraction of the k largest points (max-norm) whose
// value rescaled by the k-th largest radius is not componentwise below x.
// Consistent for V(max(x,1))/V(1).
double empirical_exceedance_ratio(const Eigen::MatrixXd& sample, const Eigen::VectorXd& x,
                                  long k);

}  // namespace hrp
