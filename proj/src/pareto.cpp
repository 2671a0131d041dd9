#include "hrp/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hrp/error.hpp"
#include "hrp/rng.hpp"
#include "hrp/special.hpp"

namespace hrp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

struct FaceTerm {
    double log_coef = 0.0;   // -1/2 log det Q_{-i} + 1/2 l^T Q^{-1} l (no CDF)
    double log_phi = 0.0;    // log of the Gaussian CDF factor
    double phi_abs_err = 0.0;
    Eigen::VectorXd mean;    // Q_{-i}^{-1} l_{-i}
    Eigen::MatrixXd cov;     // Q_{-i}^{-1}
    Eigen::MatrixXd chol;    // lower Cholesky of Q_{-i}
    Eigen::MatrixXd q_minus;
    Eigen::VectorXd l_minus;
};

Eigen::MatrixXd drop_index(const Eigen::MatrixXd& q, int i) {
    const int d = static_cast<int>(q.rows());
    Eigen::MatrixXd out(d - 1, d - 1);
    for (int r = 0, ro = 0; r < d; ++r) {
        if (r == i) continue;
        for (int c = 0, co = 0; c < d; ++c) {
            if (c == i) continue;
            out(ro, co++) = q(r, c);
        }
        ++ro;
    }
    return out;
}

Eigen::VectorXd drop_index(const Eigen::VectorXd& v, int i) {
    const int d = static_cast<int>(v.size());
    Eigen::VectorXd out(d - 1);
    for (int r = 0, ro = 0; r < d; ++r)
        if (r != i) out(ro++) = v(r);
    return out;
}

// Per-face reduced quantities plus the CDF factor at upper limit `upper`.
// The CDF is integrated to a relative target (plus a small absolute floor)
// so that the weighted face sum meets an overall relative tolerance.
FaceTerm face_term(const HrParams& p, int i, const Eigen::VectorXd& upper,
                   double phi_rel_tol, std::uint64_t seed, long max_points) {
    FaceTerm t;
    t.q_minus = drop_index(p.q(), i);
    t.l_minus = drop_index(p.l(), i);
    Eigen::LLT<Eigen::MatrixXd> llt(t.q_minus);
    if (llt.info() != Eigen::Success)
        fail(ErrorCode::CovNotPD, "face matrix Q_{-i} is not positive definite");
    t.chol = llt.matrixL();
    double log_det = 0.0;
    for (int r = 0; r < t.chol.rows(); ++r) log_det += 2.0 * std::log(t.chol(r, r));
    t.mean = llt.solve(t.l_minus);
    t.cov = llt.solve(Eigen::MatrixXd::Identity(t.q_minus.rows(), t.q_minus.cols()));
    t.cov = 0.5 * (t.cov + t.cov.transpose());
    t.log_coef = -0.5 * log_det + 0.5 * t.l_minus.dot(t.mean);

    MvnOptions mopts;
    mopts.tol = 1e-13;
    mopts.rel_tol = 0.3 * phi_rel_tol;
    mopts.seed = seed;
    mopts.max_points = max_points;
    const CdfEstimate phi = mvn_cdf(MvnSpec{t.mean, t.cov, upper}, mopts);
    t.log_phi = (phi.value > 0.0) ? std::log(phi.value)
                                  : -std::numeric_limits<double>::infinity();
    t.phi_abs_err = phi.abs_error;
    return t;
}

LogNormConst log_norm_const_raw(const Threshold& a, const HrParams& p,
                                const NormConstOptions& opts) {
    const int d = p.dim();
    const double alpha = p.alpha();
    const Eigen::VectorXd log_a = a.a.array().log().matrix();
    const double log_k = 0.5 * (d - 1) * kLog2Pi - std::log(alpha);

    std::vector<double> log_terms(d), log_cs(d), phi_errs(d);
    for (int i = 0; i < d; ++i) {
        const Eigen::VectorXd upper =
            (drop_index(log_a, i).array() - log_a[i]).matrix();
        const FaceTerm t = face_term(p, i, upper, opts.tol, derive_seed(opts.seed, i),
                                     opts.mvn_max_points);
        log_cs[i] = -alpha * log_a[i] + t.log_coef;
        log_terms[i] = log_cs[i] + t.log_phi;
        phi_errs[i] = t.phi_abs_err;
    }
    const double log_sum = log_sum_exp(log_terms);
    if (!std::isfinite(log_sum))
        fail(ErrorCode::Budget, "norm_const: all face terms underflowed");

    double rel_err = 0.0;
    for (int i = 0; i < d; ++i)
        rel_err += std::exp(log_cs[i] - log_sum) * phi_errs[i];

    LogNormConst out;
    out.log_value = log_k + log_sum;
    out.rel_error = rel_err;
    return out;
}

}  // namespace

LogNormConst log_norm_const(const Threshold& a, const HrParams& p,
                            const NormConstOptions& opts) {
    if (a.dim() != p.dim())
        fail(ErrorCode::DimensionMismatch, "norm_const: threshold dimension mismatch");
    if (!(opts.tol > 0.0)) fail(ErrorCode::OutOfRange, "norm_const: tol must be positive");
    LogNormConst first = log_norm_const_raw(a, p, opts);
    if (first.rel_error <= opts.tol || p.dim() <= 3) return first;
    // One refinement pass with a tightened per-face CDF tolerance.
    NormConstOptions tight = opts;
    tight.tol = std::max(opts.tol / (10.0 * p.dim()), 1e-12);
    tight.seed = derive_seed(opts.seed, 0x5eedULL);
    return log_norm_const_raw(a, p, tight);
}

ValueWithError norm_const(const Threshold& a, const HrParams& p,
                          const NormConstOptions& opts) {
    const LogNormConst lc = log_norm_const(a, p, opts);
    ValueWithError out;
    out.value = std::exp(lc.log_value);
    out.abs_error = lc.rel_error * out.value;
    return out;
}

HrDensity::HrDensity(const Threshold& a, const HrParams& p, const NormConstOptions& opts)
    : a_(a), p_(p), log_c_(log_norm_const(a, p, opts)) {}

double HrDensity::logpdf(const Eigen::VectorXd& z) const {
    if (z.size() != p_.dim())
        fail(ErrorCode::DimensionMismatch, "logpdf: wrong dimension");
    if ((z.array() <= 0.0).any())
        fail(ErrorCode::NonPositiveComponent, "logpdf: z must be positive");
    if ((z.array() <= a_.a.array()).all())
        return -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd w = z.array().log().matrix();
    return -0.5 * w.dot(p_.q() * w) + p_.l().dot(w) - w.sum() - log_c_.log_value;
}

double log_density(const Eigen::VectorXd& z, const Threshold& a, const HrParams& p,
                   const NormConstOptions& opts) {
    return HrDensity(a, p, opts).logpdf(z);
}

FacePartition face_partition(const HrParams& p, const NormConstOptions& opts) {
    const int d = p.dim();
    FacePartition fp;
    fp.q_minus.resize(d);
    fp.l_minus.resize(d);
    fp.chol_q_minus.resize(d);
    fp.gauss_mean.resize(d);
    fp.gauss_cov.resize(d);
    fp.order.resize(d);
    fp.cond_c0.resize(d);
    fp.cond_coef.resize(d);
    fp.cond_sd.resize(d);

    std::vector<double> log_terms(d), phi_rel(d);
    const Eigen::VectorXd zero_upper = Eigen::VectorXd::Zero(d - 1);
    for (int i = 0; i < d; ++i) {
        const FaceTerm t = face_term(p, i, zero_upper, opts.tol,
                                     derive_seed(opts.seed, 0x0facceULL + i),
                                     opts.mvn_max_points);
        log_terms[i] = t.log_coef + t.log_phi;
        phi_rel[i] = std::isfinite(t.log_phi) ? t.phi_abs_err * std::exp(-t.log_phi) : 0.0;
        fp.q_minus[i] = t.q_minus;
        fp.l_minus[i] = t.l_minus;
        fp.chol_q_minus[i] = t.chol;
        fp.gauss_mean[i] = t.mean;
        fp.gauss_cov[i] = t.cov;
    }
    const double log_sum = log_sum_exp(log_terms);
    fp.probs.resize(d);
    double err = 0.0;
    for (int i = 0; i < d; ++i) {
        fp.probs[i] = std::exp(log_terms[i] - log_sum);
        err += fp.probs[i] * phi_rel[i];
    }
    fp.probs /= fp.probs.sum();
    fp.prob_abs_error = err;

    // Cache the conditional-sampling recursion for the fixed ascending order.
    for (int i = 0; i < d; ++i) {
        std::vector<int>& ord = fp.order[i];
        for (int j = 0; j < d; ++j)
            if (j != i) ord.push_back(j);
        const int steps = d - 1;
        fp.cond_c0[i].resize(steps);
        fp.cond_sd[i].resize(steps);
        fp.cond_coef[i] = Eigen::MatrixXd::Zero(steps, d);
        for (int t = 0; t < steps; ++t) {
            std::vector<int> rem(ord.begin() + t, ord.end());
            const int m = static_cast<int>(rem.size());
            Eigen::MatrixXd qjj(m, m);
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < m; ++c) qjj(r, c) = p.q()(rem[r], rem[c]);
            Eigen::LLT<Eigen::MatrixXd> llt(qjj);
            if (llt.info() != Eigen::Success)
                fail(ErrorCode::CovNotPD, "face_partition: conditional block not PD");
            const Eigen::MatrixXd qinv =
                llt.solve(Eigen::MatrixXd::Identity(m, m));
            // Component rem[0] == ord[t] is the one sampled at this step.
            const Eigen::VectorXd row = qinv.row(0);
            Eigen::VectorXd l_rem(m);
            for (int r = 0; r < m; ++r) l_rem[r] = p.l()(rem[r]);
            fp.cond_c0[i][t] = row.dot(l_rem);
            fp.cond_sd[i][t] = std::sqrt(qinv(0, 0));
            // Coefficients of the already-sampled components (and the face
            // pivot, whose G is 0): coef_jc = sum_s row_s Q(rem_s, jc).
            for (int jc = 0; jc < d; ++jc) {
                bool in_rem = false;
                for (int s = 0; s < m; ++s)
                    if (rem[s] == jc) in_rem = true;
                if (in_rem) continue;
                double v = 0.0;
                for (int s = 0; s < m; ++s) v += row[s] * p.q()(rem[s], jc);
                fp.cond_coef[i](t, jc) = v;
            }
        }
    }
    return fp;
}

// One recursive sweep draws each component from its truncated conditional
// given the components sampled so far. The sweep alone over-weights points
// whose remaining components are unlikely to stay below zero, so it serves
// as a proposal: the target/proposal density ratio equals the product of the
// later-step truncation probabilities, and accepting with that probability
// (the first-step factor is constant and drops out) yields exact draws from
// the orthant-truncated Gaussian.
Eigen::VectorXd sample_face_gaussian(const FacePartition& fp, int face, Rng& rng) {
    const int d = fp.dim();
    if (face < 0 || face >= d) fail(ErrorCode::OutOfRange, "sample_face_gaussian: bad face");
    Eigen::VectorXd g(d);
    while (true) {
        g.setZero();
        double log_accept = 0.0;
        for (int t = 0; t < d - 1; ++t) {
            const int j = fp.order[face][t];
            const double m = fp.cond_c0[face][t] - fp.cond_coef[face].row(t).dot(g);
            const double sd = fp.cond_sd[face][t];
            const double cap = std_normal_cdf(-m / sd);
            if (t > 0) log_accept += std::log(std::max(cap, 1e-300));
            const double u = std::max(cap * rng.uniform01(), 1e-300);
            g[j] = m + sd * std_normal_quantile(u);
            if (g[j] > 0.0) g[j] = 0.0;  // guards rounding at the boundary
        }
        if (d == 2 || std::log(rng.uniform01()) <= log_accept) return g;
    }
}

namespace {

int pick_face(const Eigen::VectorXd& probs, double u) {
    double acc = 0.0;
    const int d = static_cast<int>(probs.size());
    for (int i = 0; i < d; ++i) {
        acc += probs[i];
        if (u <= acc) return i;
    }
    return d - 1;
}

}  // namespace

Eigen::MatrixXd sample_rows(long row_begin, long row_end, const Threshold& a,
                            const HrParams& p, std::uint64_t seed,
                            const NormConstOptions& opts) {
    if (row_begin < 0 || row_end < row_begin)
        fail(ErrorCode::OutOfRange, "sample_rows: bad row range");
    const int d = p.dim();
    const double alpha = p.alpha();
    const HrParams std_p = standardize(p, a);
    const FacePartition fp = face_partition(std_p, opts);

    Eigen::MatrixXd out(row_end - row_begin, d);
    for (long r = row_begin; r < row_end; ++r) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
        const double radius = 1.0 / rng.uniform01();  // Pareto(1) by inversion
        const int face = pick_face(fp.probs, rng.uniform01());
        const Eigen::VectorXd g = sample_face_gaussian(fp, face, rng);
        for (int j = 0; j < d; ++j) {
            const double std_coord = radius * std::exp(g[j]);
            out(r - row_begin, j) = a.a[j] * std::pow(std_coord, 1.0 / alpha);
        }
    }
    return out;
}

Eigen::MatrixXd sample(long n, const Threshold& a, const HrParams& p, std::uint64_t seed,
                       const NormConstOptions& opts) {
    if (n < 0) fail(ErrorCode::OutOfRange, "sample: n must be nonnegative");
    return sample_rows(0, n, a, p, seed, opts);
}

Eigen::MatrixXd sample_gen(long n, const Threshold& a, const GenHrParams& p,
                           std::uint64_t seed, const NormConstOptions& opts) {
    const GenReduction red = gen_reduce(p, a);
    Eigen::MatrixXd std_sample =
        sample(n, Threshold::ones(p.dim()), red.std_params, seed, opts);
    for (long r = 0; r < std_sample.rows(); ++r)
        for (int j = 0; j < p.dim(); ++j)
            std_sample(r, j) =
                red.back_scale[j] * std::pow(std_sample(r, j), red.back_power[j]);
    return std_sample;
}

namespace {

// log C_a as a function of raw (Q, l) without re-validation; used by the
// finite-difference paths where perturbed matrices stay interior.
double log_c_at(const Threshold& a, const Eigen::MatrixXd& q, const Eigen::VectorXd& l,
                const NormConstOptions& opts) {
    const HrParams p = validate_hr(q, l);
    return log_norm_const(a, p, opts).log_value;
}

}  // namespace

Moments moments(const Threshold& a, const HrParams& p, const NormConstOptions& opts) {
    const int d = p.dim();
    NormConstOptions tight = opts;
    tight.tol = std::min(opts.tol, 1e-8);  // derivative noise must stay below h

    Moments mom;
    mom.mean_log.resize(d);
    mom.cov_log.resize(d, d);

    // First derivatives in l.
    const double h1 = 1e-4;
    for (int i = 0; i < d; ++i) {
        const double h = h1 * std::max(1.0, std::fabs(p.l()[i]));
        Eigen::VectorXd lp = p.l(), lm = p.l();
        lp[i] += h;
        lm[i] -= h;
        mom.mean_log[i] =
            (log_c_at(a, p.q(), lp, tight) - log_c_at(a, p.q(), lm, tight)) / (2 * h);
    }

    // Second derivatives in l.
    const double h2 = 2e-3;
    const double f0 = log_c_at(a, p.q(), p.l(), tight);
    for (int i = 0; i < d; ++i) {
        const double hi = h2 * std::max(1.0, std::fabs(p.l()[i]));
        Eigen::VectorXd lp = p.l(), lm = p.l();
        lp[i] += hi;
        lm[i] -= hi;
        mom.cov_log(i, i) = (log_c_at(a, p.q(), lp, tight) - 2 * f0 +
                             log_c_at(a, p.q(), lm, tight)) /
                            (hi * hi);
        for (int j = i + 1; j < d; ++j) {
            const double hj = h2 * std::max(1.0, std::fabs(p.l()[j]));
            Eigen::VectorXd lpp = p.l(), lpm = p.l(), lmp = p.l(), lmm = p.l();
            lpp[i] += hi; lpp[j] += hj;
            lpm[i] += hi; lpm[j] -= hj;
            lmp[i] -= hi; lmp[j] += hj;
            lmm[i] -= hi; lmm[j] -= hj;
            const double v = (log_c_at(a, p.q(), lpp, tight) - log_c_at(a, p.q(), lpm, tight) -
                              log_c_at(a, p.q(), lmp, tight) + log_c_at(a, p.q(), lmm, tight)) /
                             (4 * hi * hj);
            mom.cov_log(i, j) = mom.cov_log(j, i) = v;
        }
    }

    // Gradient along the centered-matrix directions: the mean of the matrix
    // part of the sufficient statistic.
    const ParamVector pv(d);
    const double hq = 1e-4 * std::max(1.0, p.q().cwiseAbs().maxCoeff());
    mom.stat_mat = Eigen::MatrixXd::Zero(d, d);
    for (int k = 0; k < pv.mat_size(); ++k) {
        const Eigen::MatrixXd b = pv.mat_basis(k);
        const double deriv = (log_c_at(a, p.q() + hq * b, p.l(), tight) -
                              log_c_at(a, p.q() - hq * b, p.l(), tight)) /
                             (2 * hq);
        mom.stat_mat += deriv * b;
    }
    return mom;
}

double fractional_moment(const Threshold& a, const HrParams& p, const Eigen::VectorXd& u,
                         const NormConstOptions& opts) {
    if (u.size() != p.dim())
        fail(ErrorCode::DimensionMismatch, "fractional_moment: wrong dimension");
    if (!(u.sum() < p.alpha()))
        fail(ErrorCode::MomentDoesNotExist,
             "fractional_moment: requires sum(u) < alpha");
    const double log_num = log_c_at(a, p.q(), p.l() + u, opts);
    const double log_den = log_norm_const(a, p, opts).log_value;
    return std::exp(log_num - log_den);
}

HrParams from_spectral(const Eigen::VectorXd& m, const Eigen::MatrixXd& sigma,
                       double alpha) {
    const int d = static_cast<int>(m.size());
    if (sigma.rows() != d || sigma.cols() != d)
        fail(ErrorCode::DimensionMismatch, "from_spectral: wrong dimensions");
    if (!(alpha > 0.0)) fail(ErrorCode::ExponentNonPositive, "from_spectral: alpha <= 0");
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (sigma + sigma.transpose()));
    if (llt.info() != Eigen::Success)
        fail(ErrorCode::CovNotPD, "from_spectral: Sigma not positive definite");
    const Eigen::MatrixXd sinv = llt.solve(Eigen::MatrixXd::Identity(d, d));
    const Eigen::VectorXd s1 = llt.solve(Eigen::VectorXd::Ones(d));
    const double t = s1.sum();
    const Eigen::MatrixXd q = sinv - (s1 * s1.transpose()) / t;
    const Eigen::VectorXd l = llt.solve(m) - s1 * ((alpha + m.dot(s1)) / t);
    HrParams out = validate_hr(q, l);
    if (std::fabs(out.alpha() - alpha) > 1e-10 * std::max(1.0, alpha))
        fail(ErrorCode::ConstraintViolation, "from_spectral: exponent mismatch");
    return out;
}

}  // namespace hrp
