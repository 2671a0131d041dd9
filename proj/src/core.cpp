#include "hrp/core.hpp"

#include <cmath>

#include "hrp/error.hpp"

namespace hrp {

namespace {

void check_dim(int d) {
    if (d < 2) fail(ErrorCode::OutOfRange, "dimension must be at least 2");
}

// Relative scale used by the structural gates.
double matrix_scale(const Eigen::MatrixXd& q) {
    return std::max(1.0, q.cwiseAbs().maxCoeff());
}

// Shared structural validation of the dependence matrix. Returns the
// symmetrized, exactly centered matrix.
Eigen::MatrixXd validate_q(const Eigen::MatrixXd& q) {
    const int d = static_cast<int>(q.rows());
    check_dim(d);
    if (q.cols() != d) fail(ErrorCode::DimensionMismatch, "Q must be square");
    const double scale = matrix_scale(q);
    if ((q - q.transpose()).cwiseAbs().maxCoeff() > kStructTol * scale)
        fail(ErrorCode::NotSymmetric, "Q is not symmetric");
    Eigen::MatrixXd qs = 0.5 * (q + q.transpose());
    if ((qs * Eigen::VectorXd::Ones(d)).cwiseAbs().maxCoeff() > kStructTol * scale * d)
        fail(ErrorCode::KernelViolation, "Q does not annihilate the ones vector");
    qs = center_project(qs);

    const Eigen::MatrixXd u = complement_basis(d);
    const Eigen::MatrixXd m = u.transpose() * qs * u;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    const double gate = kStructTol * std::max(1.0, lmax);
    if (lmin <= gate) {
        if (lmin >= -gate)
            fail(ErrorCode::KernelViolation, "rank of Q is below d-1");
        fail(ErrorCode::NonPositiveOnComplement,
             "Q is not positive definite on the complement of span(1)");
    }
    return qs;
}

}  // namespace

Eigen::MatrixXd complement_basis(int d) {
    check_dim(d);
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(d, d - 1);
    for (int k = 1; k < d; ++k) {
        const double norm = std::sqrt(static_cast<double>(k) * (k + 1));
        for (int i = 0; i < k; ++i) u(i, k - 1) = 1.0 / norm;
        u(k, k - 1) = -static_cast<double>(k) / norm;
    }
    return u;
}

Eigen::MatrixXd center_project(const Eigen::MatrixXd& m) {
    const int d = static_cast<int>(m.rows());
    if (m.cols() != d) fail(ErrorCode::DimensionMismatch, "center_project: square input required");
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > kStructTol * matrix_scale(m))
        fail(ErrorCode::NotSymmetric, "center_project: input not symmetric");
    const Eigen::MatrixXd p =
        Eigen::MatrixXd::Identity(d, d) - Eigen::MatrixXd::Constant(d, d, 1.0 / d);
    Eigen::MatrixXd out = p * (0.5 * (m + m.transpose())) * p;
    return 0.5 * (out + out.transpose());
}

Threshold::Threshold(Eigen::VectorXd values) : a(std::move(values)) {
    if (a.size() < 1 || (a.array() <= 0.0).any())
        fail(ErrorCode::NonPositiveComponent, "threshold entries must be positive");
}

HrParams validate_hr(const Eigen::MatrixXd& q, const Eigen::VectorXd& l) {
    Eigen::MatrixXd qs = validate_q(q);
    const int d = static_cast<int>(qs.rows());
    if (l.size() != d) fail(ErrorCode::DimensionMismatch, "l has wrong length");
    const double alpha = -l.sum();
    if (!(alpha > 0.0))
        fail(ErrorCode::ExponentNonPositive, "l.1 must be negative");
    return HrParams(std::move(qs), l, alpha);
}

GenHrParams validate_gen(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& q,
                         const Eigen::VectorXd& l) {
    Eigen::MatrixXd qs = validate_q(q);
    const int d = static_cast<int>(qs.rows());
    if (l.size() != d || alpha.size() != d)
        fail(ErrorCode::DimensionMismatch, "alpha or l has wrong length");
    if ((alpha.array() <= 0.0).any())
        fail(ErrorCode::ConstraintViolation, "all tail indices must be positive");
    const double c = -l.sum();
    if (!(c > 0.0)) fail(ErrorCode::ExponentNonPositive, "l.1 must be negative");
    if (std::fabs(c - 1.0) > kStructTol)
        fail(ErrorCode::ConstraintViolation, "identifiability requires l.1 = -1");
    // Snap exactly onto the constraint without changing the model.
    return GenHrParams(c * alpha, qs / (c * c), l / c);
}

SufficientStat sufficient_stat(const Eigen::VectorXd& z) {
    const int d = static_cast<int>(z.size());
    check_dim(d);
    if ((z.array() <= 0.0).any())
        fail(ErrorCode::NonPositiveComponent, "sufficient_stat: z must be positive");
    SufficientStat t;
    t.vec = z.array().log().matrix();
    const Eigen::VectorXd centered = t.vec.array() - t.vec.mean();
    t.mat = -0.5 * centered * centered.transpose();
    return t;
}

double param_inner(const Eigen::MatrixXd& a1, const Eigen::VectorXd& b1,
                   const Eigen::MatrixXd& a2, const Eigen::VectorXd& b2) {
    return a1.cwiseProduct(a2).sum() + b1.dot(b2);
}

ParamVector::ParamVector(int d) : d_(d), u_(complement_basis(d)) {
    check_dim(d);
}

Eigen::VectorXd ParamVector::embed(const Eigen::MatrixXd& a,
                                   const Eigen::VectorXd& b) const {
    if (a.rows() != d_ || a.cols() != d_ || b.size() != d_)
        fail(ErrorCode::DimensionMismatch, "ParamVector::embed: wrong dimensions");
    const Eigen::MatrixXd m = u_.transpose() * a * u_;
    Eigen::VectorXd coords(size());
    int idx = 0;
    const double sqrt2 = std::sqrt(2.0);
    for (int i = 0; i < d_ - 1; ++i) {
        coords[idx++] = m(i, i);
        for (int j = i + 1; j < d_ - 1; ++j) coords[idx++] = sqrt2 * m(i, j);
    }
    coords.tail(d_) = b;
    return coords;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> ParamVector::extract(
    const Eigen::VectorXd& coords) const {
    if (coords.size() != size())
        fail(ErrorCode::DimensionMismatch, "ParamVector::extract: wrong length");
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d_ - 1, d_ - 1);
    int idx = 0;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < d_ - 1; ++i) {
        m(i, i) = coords[idx++];
        for (int j = i + 1; j < d_ - 1; ++j) {
            m(i, j) = m(j, i) = inv_sqrt2 * coords[idx++];
        }
    }
    return {u_ * m * u_.transpose(), coords.tail(d_)};
}

Eigen::MatrixXd ParamVector::mat_basis(int k) const {
    if (k < 0 || k >= mat_size())
        fail(ErrorCode::OutOfRange, "ParamVector::mat_basis: index out of range");
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(d_ - 1, d_ - 1);
    int idx = 0;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < d_ - 1; ++i) {
        if (idx == k) {
            e(i, i) = 1.0;
            return u_ * e * u_.transpose();
        }
        ++idx;
        for (int j = i + 1; j < d_ - 1; ++j) {
            if (idx == k) {
                e(i, j) = e(j, i) = inv_sqrt2;
                return u_ * e * u_.transpose();
            }
            ++idx;
        }
    }
    fail(ErrorCode::OutOfRange, "ParamVector::mat_basis: index out of range");
}

std::pair<HrParams, Threshold> scale_transform(const HrParams& p, const Threshold& a,
                                               const Eigen::VectorXd& u) {
    if (u.size() != p.dim() || a.dim() != p.dim())
        fail(ErrorCode::DimensionMismatch, "scale_transform: wrong dimensions");
    if ((u.array() <= 0.0).any())
        fail(ErrorCode::NonPositiveComponent, "scale_transform: u must be positive");
    const Eigen::VectorXd log_u = u.array().log().matrix();
    HrParams out = validate_hr(p.q(), p.l() + p.q() * log_u);
    return {std::move(out), Threshold(u.cwiseProduct(a.a))};
}

std::pair<HrParams, Threshold> power_transform(const HrParams& p, const Threshold& a,
                                               double beta) {
    if (!(beta > 0.0)) fail(ErrorCode::NonPositiveBeta, "power_transform: beta must be positive");
    if (a.dim() != p.dim())
        fail(ErrorCode::DimensionMismatch, "power_transform: wrong dimensions");
    HrParams out = validate_hr(p.q() / (beta * beta), p.l() / beta);
    return {std::move(out), Threshold(a.a.array().pow(beta).matrix())};
}

HrParams standardize(const HrParams& p, const Threshold& a) {
    if (a.dim() != p.dim())
        fail(ErrorCode::DimensionMismatch, "standardize: wrong dimensions");
    const double alpha = p.alpha();
    const Eigen::VectorXd log_a = a.a.array().log().matrix();
    return validate_hr(p.q() / (alpha * alpha), (p.l() - p.q() * log_a) / alpha);
}

std::pair<GenHrParams, Threshold> gen_scale_transform(const GenHrParams& p,
                                                      const Threshold& a,
                                                      const Eigen::VectorXd& u) {
    if (u.size() != p.dim() || a.dim() != p.dim())
        fail(ErrorCode::DimensionMismatch, "gen_scale_transform: wrong dimensions");
    if ((u.array() <= 0.0).any())
        fail(ErrorCode::NonPositiveComponent, "gen_scale_transform: u must be positive");
    const Eigen::VectorXd dl = p.alpha().cwiseProduct(u.array().log().matrix());
    GenHrParams out = validate_gen(p.alpha(), p.q(), p.l() + p.q() * dl);
    return {std::move(out), Threshold(u.cwiseProduct(a.a))};
}

std::pair<GenHrParams, Threshold> gen_power_transform(const GenHrParams& p,
                                                      const Threshold& a,
                                                      const Eigen::VectorXd& beta) {
    if (beta.size() != p.dim() || a.dim() != p.dim())
        fail(ErrorCode::DimensionMismatch, "gen_power_transform: wrong dimensions");
    if ((beta.array() <= 0.0).any())
        fail(ErrorCode::NonPositiveBeta, "gen_power_transform: beta must be positive");
    GenHrParams out = validate_gen(p.alpha().cwiseQuotient(beta), p.q(), p.l());
    return {std::move(out), Threshold(a.a.array().pow(beta.array()).matrix())};
}

std::pair<GenHrParams, Threshold> gen_transforms(const GenHrParams& p, const Threshold& a,
                                                 const Eigen::VectorXd& u,
                                                 const Eigen::VectorXd& beta) {
    auto scaled = gen_scale_transform(p, a, u);
    return gen_power_transform(scaled.first, scaled.second, beta);
}

GenReduction gen_reduce(const GenHrParams& p, const Threshold& a) {
    if (a.dim() != p.dim())
        fail(ErrorCode::DimensionMismatch, "gen_reduce: wrong dimensions");
    const Eigen::VectorXd dl =
        p.alpha().cwiseProduct(a.a.array().log().matrix());
    HrParams std_params = validate_hr(p.q(), p.l() - p.q() * dl);
    const double c = std_params.alpha();
    GenReduction out{std::move(std_params),
                     (c / p.alpha().array()).matrix(), a.a};
    return out;
}

}  // namespace hrp
