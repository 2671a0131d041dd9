#pragma once

#include <utility>

#include <Eigen/Dense>

namespace hrp {

// Tolerances for structural validation of parameter matrices. Checks are
// relative; inputs passing the gate are symmetrized and re-projected so the
// stored objects satisfy the constraints to machine precision.
constexpr double kStructTol = 1e-10;

// Orthonormal basis of the hyperplane {v : v.1 = 0} in R^d (Helmert
// construction), returned as a d x (d-1) matrix with orthonormal columns.
Eigen::MatrixXd complement_basis(int d);

// Orthogonal projection M -> (I - J/d) M (I - J/d) onto {A : A.1 = 0} within
// the symmetric matrices. Throws NotSymmetric for asymmetric input.
Eigen::MatrixXd center_project(const Eigen::MatrixXd& m);

struct Threshold {
    Eigen::VectorXd a;

    explicit Threshold(Eigen::VectorXd values);
    static Threshold ones(int d) { return Threshold(Eigen::VectorXd::Ones(d)); }
    int dim() const { return static_cast<int>(a.size()); }
};

// Natural parameter (Q, l) of the Husler-Reiss Pareto family. Q is symmetric,
// annihilates 1_d and is positive definite on the complement of span(1_d);
// the Pareto exponent is alpha = -l.1 > 0. Immutable after construction.
class HrParams {
  public:
    const Eigen::MatrixXd& q() const { return q_; }
    const Eigen::VectorXd& l() const { return l_; }
    int dim() const { return static_cast<int>(l_.size()); }
    double alpha() const { return alpha_; }

    friend HrParams validate_hr(const Eigen::MatrixXd& q, const Eigen::VectorXd& l);

  private:
    HrParams(Eigen::MatrixXd q, Eigen::VectorXd l, double alpha)
        : q_(std::move(q)), l_(std::move(l)), alpha_(alpha) {}
    Eigen::MatrixXd q_;
    Eigen::VectorXd l_;
    double alpha_;
};

// Checks all structural constraints and returns the cleaned-up parameters.
// Errors: NotSymmetric, KernelViolation, NonPositiveOnComplement,
// ExponentNonPositive.
HrParams validate_hr(const Eigen::MatrixXd& q, const Eigen::VectorXd& l);

// Generalized model: per-margin tail indices alpha_i > 0 together with (Q, l)
// normalized so that l.1 = -1 (identifiability). Inputs within kStructTol of
// the constraint are snapped onto it by the model-preserving substitution
// (alpha, Q, l) -> (c alpha, Q/c^2, l/c) with c = -l.1.
class GenHrParams {
  public:
    const Eigen::VectorXd& alpha() const { return alpha_; }
    const Eigen::MatrixXd& q() const { return q_; }
    const Eigen::VectorXd& l() const { return l_; }
    int dim() const { return static_cast<int>(l_.size()); }

    friend GenHrParams validate_gen(const Eigen::VectorXd& alpha,
                                    const Eigen::MatrixXd& q,
                                    const Eigen::VectorXd& l);

  private:
    GenHrParams(Eigen::VectorXd alpha, Eigen::MatrixXd q, Eigen::VectorXd l)
        : alpha_(std::move(alpha)), q_(std::move(q)), l_(std::move(l)) {}
    Eigen::VectorXd alpha_;
    Eigen::MatrixXd q_;
    Eigen::VectorXd l_;
};

GenHrParams validate_gen(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& q,
                         const Eigen::VectorXd& l);

// Natural sufficient statistic T(z): the pair of the centered log outer
// product (times -1/2) and the log vector.
struct SufficientStat {
    Eigen::MatrixXd mat;  // -1/2 (log z - mean) (log z - mean)^T, annihilates 1_d
    Eigen::VectorXd vec;  // log z
};

SufficientStat sufficient_stat(const Eigen::VectorXd& z);

// Inner product on the parameter space E = {(A,b) : A = A^T, A.1 = 0}:
// sum_ij A_ij A'_ij + sum_k b_k b'_k.
double param_inner(const Eigen::MatrixXd& a1, const Eigen::VectorXd& b1,
                   const Eigen::MatrixXd& a2, const Eigen::VectorXd& b2);

// Flat coordinates on E. The matrix part is stored through the orthonormal
// basis B_k = U E_k U^T of {A : A.1 = 0} (U the complement basis, E_k the
// sqrt(2)-scaled upper-triangle basis of symmetric (d-1) x (d-1) matrices,
// row-major), so the Euclidean dot product of coordinates equals the E inner
// product and embed/extract round-trips exactly.
class ParamVector {
  public:
    explicit ParamVector(int d);

    int dim() const { return d_; }
    int size() const { return d_ * (d_ + 1) / 2; }
    int mat_size() const { return (d_ - 1) * d_ / 2; }

    Eigen::VectorXd embed(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) const;
    std::pair<Eigen::MatrixXd, Eigen::VectorXd> extract(const Eigen::VectorXd& coords) const;

    // k-th orthonormal basis matrix of the A part, 0 <= k < mat_size().
    Eigen::MatrixXd mat_basis(int k) const;

    const Eigen::MatrixXd& complement() const { return u_; }

  private:
    int d_;
    Eigen::MatrixXd u_;
};

// Scale transform: u o Z has parameters (Q, l + Q log u) on threshold u o a.
// The exponent is unchanged.
std::pair<HrParams, Threshold> scale_transform(const HrParams& p, const Threshold& a,
                                               const Eigen::VectorXd& u);

// Power transform: Z^beta has parameters (Q/beta^2, l/beta) on a^beta and
// exponent alpha/beta. Errors: NonPositiveBeta.
std::pair<HrParams, Threshold> power_transform(const HrParams& p, const Threshold& a,
                                               double beta);

// Parameters of the standardized vector on threshold 1_d with exponent 1:
// Z = a Zs^(1/alpha) with Zs ~ (Q/alpha^2, (l - Q log a)/alpha).
HrParams standardize(const HrParams& p, const Threshold& a);

// Generalized-model transforms.
std::pair<GenHrParams, Threshold> gen_scale_transform(const GenHrParams& p,
                                                      const Threshold& a,
                                                      const Eigen::VectorXd& u);
std::pair<GenHrParams, Threshold> gen_power_transform(const GenHrParams& p,
                                                      const Threshold& a,
                                                      const Eigen::VectorXd& beta);
// Scale by u, then raise to the componentwise power beta.
std::pair<GenHrParams, Threshold> gen_transforms(const GenHrParams& p, const Threshold& a,
                                                 const Eigen::VectorXd& u,
                                                 const Eigen::VectorXd& beta);

// Reduction of the generalized model to the standard one on threshold 1_d:
// Z = back_scale o Zs^back_power with Zs ~ std_params (exponent c, equal to 1
// under the identifiability normalization) and back_power = c / alpha.
struct GenReduction {
    HrParams std_params;
    Eigen::VectorXd back_power;
    Eigen::VectorXd back_scale;
};

GenReduction gen_reduce(const GenHrParams& p, const Threshold& a);

}  // namespace hrp
