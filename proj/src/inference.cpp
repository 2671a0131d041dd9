#include "hrp/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hrp/error.hpp"
#include "hrp/special.hpp"

namespace hrp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::MatrixXd log_matrix(const Eigen::MatrixXd& sample) {
    if ((sample.array() <= 0.0).any())
        fail(ErrorCode::NonPositiveComponent, "sample entries must be positive");
    return sample.array().log().matrix();
}

// ---------------------------------------------------------------------------
// Chart for the standard-model parameter set: log-Cholesky coordinates of the
// complement restriction M = U^T Q U, followed by the free vector l.
// ---------------------------------------------------------------------------
class StdChart {
  public:
    explicit StdChart(int d) : d_(d), pv_(d), u_(pv_.complement()) {}

    int n_chol() const { return (d_ - 1) * d_ / 2; }
    int size() const { return n_chol() + d_; }
    const ParamVector& pv() const { return pv_; }

    Eigen::VectorXd pack(const Eigen::MatrixXd& q, const Eigen::VectorXd& l) const {
        const Eigen::MatrixXd m = u_.transpose() * q * u_;
        Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (m + m.transpose()));
        if (llt.info() != Eigen::Success)
            fail(ErrorCode::CovNotPD, "chart: Q not positive definite on complement");
        const Eigen::MatrixXd lm = llt.matrixL();
        Eigen::VectorXd x(size());
        int idx = 0;
        for (int r = 0; r < d_ - 1; ++r)
            for (int c = 0; c <= r; ++c)
                x[idx++] = (r == c) ? std::log(lm(r, r)) : lm(r, c);
        x.tail(d_) = l;
        return x;
    }

    void unpack(const Eigen::VectorXd& x, Eigen::MatrixXd& q, Eigen::VectorXd& l) const {
        Eigen::MatrixXd lm = Eigen::MatrixXd::Zero(d_ - 1, d_ - 1);
        int idx = 0;
        for (int r = 0; r < d_ - 1; ++r)
            for (int c = 0; c <= r; ++c)
                lm(r, c) = (r == c) ? std::exp(x[idx++]) : x[idx++];
        const Eigen::MatrixXd m = lm * lm.transpose();
        q = u_ * m * u_.transpose();
        q = 0.5 * (q + q.transpose());
        l = x.tail(d_);
    }

    // Columns are the parameter-space coordinates of the partial derivatives
    // of (Q, l) with respect to the chart coordinates.
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const {
        Eigen::MatrixXd lm = Eigen::MatrixXd::Zero(d_ - 1, d_ - 1);
        int idx = 0;
        for (int r = 0; r < d_ - 1; ++r)
            for (int c = 0; c <= r; ++c)
                lm(r, c) = (r == c) ? std::exp(x[idx++]) : x[idx++];
        Eigen::MatrixXd jac(pv_.size(), size());
        const Eigen::VectorXd zero_l = Eigen::VectorXd::Zero(d_);
        idx = 0;
        for (int r = 0; r < d_ - 1; ++r) {
            for (int c = 0; c <= r; ++c) {
                Eigen::MatrixXd dl = Eigen::MatrixXd::Zero(d_ - 1, d_ - 1);
                dl(r, c) = (r == c) ? lm(r, r) : 1.0;
                Eigen::MatrixXd dm = dl * lm.transpose() + lm * dl.transpose();
                Eigen::MatrixXd dq = u_ * dm * u_.transpose();
                jac.col(idx++) = pv_.embed(0.5 * (dq + dq.transpose()), zero_l);
            }
        }
        const Eigen::MatrixXd zero_q = Eigen::MatrixXd::Zero(d_, d_);
        for (int j = 0; j < d_; ++j) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(d_);
            e[j] = 1.0;
            jac.col(idx++) = pv_.embed(zero_q, e);
        }
        return jac;
    }

  private:
    int d_;
    ParamVector pv_;
    Eigen::MatrixXd u_;
};

// log C_1(Q,l); -inf outside the parameter cone (line-search barrier).
double log_c_std(const Eigen::MatrixXd& q, const Eigen::VectorXd& l,
                 const NormConstOptions& nc) {
    if (!(-l.sum() > 1e-12)) return std::numeric_limits<double>::infinity();
    try {
        const HrParams p = validate_hr(q, l);
        return log_norm_const(Threshold::ones(static_cast<int>(l.size())), p, nc).log_value;
    } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
    }
}

// Gradient of log C_1 in ParamVector coordinates (central differences).
Eigen::VectorXd grad_log_c_std(const Eigen::MatrixXd& q, const Eigen::VectorXd& l,
                               const ParamVector& pv, const NormConstOptions& nc) {
    const int d = static_cast<int>(l.size());
    Eigen::VectorXd g(pv.size());
    const double hq = 1e-4 * std::max(1.0, q.cwiseAbs().maxCoeff());
    for (int k = 0; k < pv.mat_size(); ++k) {
        const Eigen::MatrixXd b = pv.mat_basis(k);
        g[k] = (log_c_std(q + hq * b, l, nc) - log_c_std(q - hq * b, l, nc)) / (2 * hq);
    }
    for (int j = 0; j < d; ++j) {
        const double h = 1e-4 * std::max(1.0, std::fabs(l[j]));
        Eigen::VectorXd lp = l, lm = l;
        lp[j] += h;
        lm[j] -= h;
        g[pv.mat_size() + j] = (log_c_std(q, lp, nc) - log_c_std(q, lm, nc)) / (2 * h);
    }
    return g;
}

struct StdFitResult {
    Eigen::MatrixXd q;
    Eigen::VectorXd l;
    double objective = kNegInf;  // per-observation log-likelihood, up to data constant
    double score_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Maximize <theta, tbar> - log C_1(theta) by BFGS on the chart; tbar_e are the
// ParamVector coordinates of the averaged sufficient statistic.
StdFitResult maximize_standard(const Eigen::VectorXd& tbar_e, const StdChart& chart,
                               const Eigen::MatrixXd& q0, const Eigen::VectorXd& l0,
                               const FitOptions& opts) {
    NormConstOptions nc;
    nc.tol = opts.mvn_tol;
    nc.seed = opts.seed;
    const ParamVector& pv = chart.pv();

    auto objective = [&](const Eigen::VectorXd& x) {
        Eigen::MatrixXd q;
        Eigen::VectorXd l;
        chart.unpack(x, q, l);
        const double lc = log_c_std(q, l, nc);
        if (!std::isfinite(lc)) return kNegInf;
        return pv.embed(q, l).dot(tbar_e) - lc;
    };

    Eigen::VectorXd x = chart.pack(q0, l0);
    double fx = objective(x);
    Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(chart.size(), chart.size());

    StdFitResult res;
    Eigen::VectorXd score_e, grad;
    auto refresh_gradient = [&]() {
        Eigen::MatrixXd q;
        Eigen::VectorXd l;
        chart.unpack(x, q, l);
        score_e = tbar_e - grad_log_c_std(q, l, pv, nc);
        grad = chart.jacobian(x).transpose() * score_e;
    };
    refresh_gradient();

    int it = 0;
    for (; it < opts.max_iters; ++it) {
        res.score_norm = score_e.norm();
        if (res.score_norm <= opts.tol) {
            res.converged = true;
            break;
        }
        Eigen::VectorXd dir = h_inv * grad;
        if (dir.dot(grad) <= 0.0) {
            h_inv.setIdentity();
            dir = grad;
        }
        double step = 1.0;
        const double slope = grad.dot(dir);
        double f_new = kNegInf;
        Eigen::VectorXd x_new;
        while (step > 1e-14) {
            x_new = x + step * dir;
            f_new = objective(x_new);
            if (f_new >= fx + 1e-4 * step * slope) break;
            step *= 0.5;
        }
        if (step <= 1e-14 || !(f_new > kNegInf)) break;  // stalled line search

        const Eigen::VectorXd g_old = grad;
        const Eigen::VectorXd dx = x_new - x;
        x = x_new;
        fx = f_new;
        refresh_gradient();
        const Eigen::VectorXd dg = grad - g_old;  // gradient of the ascent target
        const double sy = -dx.dot(dg);            // curvature for the minimized -L
        if (sy > 1e-12 * dx.norm() * dg.norm()) {
            const Eigen::VectorXd hy = h_inv * (-dg);
            const double yhy = (-dg).dot(hy);
            h_inv += ((sy + yhy) / (sy * sy)) * (dx * dx.transpose()) -
                     (hy * dx.transpose() + dx * hy.transpose()) / sy;
        }
    }
    res.iterations = it;
    res.score_norm = score_e.norm();
    if (res.score_norm <= opts.tol) res.converged = true;
    chart.unpack(x, res.q, res.l);
    res.objective = fx;
    return res;
}

// Default optimizer start: precision-like matrix from the log covariance,
// Hill-type exponent from the radii.
void default_start(const Eigen::MatrixXd& w, const Eigen::MatrixXd& vn,
                   Eigen::MatrixXd& q0, Eigen::VectorXd& l0) {
    const int d = static_cast<int>(w.cols());
    const Eigen::MatrixXd u = complement_basis(d);
    Eigen::MatrixXd m = u.transpose() * vn * u;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    const double scale = std::max(es.eigenvalues().maxCoeff(), 1e-8);
    Eigen::VectorXd inv_eig(d - 1);
    for (int i = 0; i < d - 1; ++i)
        inv_eig[i] = 1.0 / std::clamp(es.eigenvalues()[i], 1e-4 * scale, 1e4 * scale);
    const Eigen::MatrixXd m_inv =
        es.eigenvectors() * inv_eig.asDiagonal() * es.eigenvectors().transpose();
    q0 = u * m_inv * u.transpose();
    q0 = 0.5 * (q0 + q0.transpose());

    double mean_log_radius = 0.0;
    for (long i = 0; i < w.rows(); ++i) mean_log_radius += w.row(i).maxCoeff();
    mean_log_radius /= static_cast<double>(w.rows());
    const double alpha0 = 1.0 / std::max(mean_log_radius, 1e-8);
    l0 = Eigen::VectorXd::Constant(d, -alpha0 / d);
}

Eigen::VectorXd tbar_coords(const Eigen::MatrixXd& w, const ParamVector& pv) {
    const int d = static_cast<int>(w.cols());
    const long n = w.rows();
    Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd vec = Eigen::VectorXd::Zero(d);
    for (long i = 0; i < n; ++i) {
        const Eigen::VectorXd wi = w.row(i);
        const Eigen::VectorXd c = wi.array() - wi.mean();
        mat -= 0.5 * c * c.transpose();
        vec += wi;
    }
    mat /= static_cast<double>(n);
    vec /= static_cast<double>(n);
    return pv.embed(mat, vec);
}

// Hessian of log C_a over ParamVector coordinates, symmetrized.
Eigen::MatrixXd hess_log_c(const Threshold& a, const HrParams& p, const ParamVector& pv,
                           const NormConstOptions& nc) {
    const int dim = pv.size();
    const int d = p.dim();
    auto at = [&](const Eigen::VectorXd& delta) {
        Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(d, d);
        for (int k = 0; k < pv.mat_size(); ++k)
            if (delta[k] != 0.0) dq += delta[k] * pv.mat_basis(k);
        const Eigen::VectorXd l = p.l() + delta.tail(d);
        const HrParams pert = validate_hr(p.q() + dq, l);
        return log_norm_const(a, pert, nc).log_value;
    };
    Eigen::VectorXd h(dim);
    const Eigen::VectorXd center = pv.embed(p.q(), p.l());
    for (int i = 0; i < dim; ++i) h[i] = 2e-3 * std::max(1.0, std::fabs(center[i]));

    const double f0 = at(Eigen::VectorXd::Zero(dim));
    Eigen::MatrixXd hess(dim, dim);
    for (int i = 0; i < dim; ++i) {
        Eigen::VectorXd dp = Eigen::VectorXd::Zero(dim), dm = Eigen::VectorXd::Zero(dim);
        dp[i] = h[i];
        dm[i] = -h[i];
        hess(i, i) = (at(dp) - 2 * f0 + at(dm)) / (h[i] * h[i]);
        for (int j = i + 1; j < dim; ++j) {
            Eigen::VectorXd dpp = Eigen::VectorXd::Zero(dim);
            Eigen::VectorXd dpm = dpp, dmp = dpp, dmm = dpp;
            dpp[i] = h[i]; dpp[j] = h[j];
            dpm[i] = h[i]; dpm[j] = -h[j];
            dmp[i] = -h[i]; dmp[j] = h[j];
            dmm[i] = -h[i]; dmm[j] = -h[j];
            const double v = (at(dpp) - at(dpm) - at(dmp) + at(dmm)) / (4 * h[i] * h[j]);
            hess(i, j) = hess(j, i) = v;
        }
    }
    return hess;
}

Eigen::MatrixXd psd_project(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::VectorXd errors_from_info(const Eigen::MatrixXd& info, double n_scale) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
    const double floor = 1e-12 * std::max(es.eigenvalues().maxCoeff(), 1e-300);
    Eigen::VectorXd inv_ev(info.rows());
    for (int i = 0; i < info.rows(); ++i)
        inv_ev[i] = 1.0 / std::max(es.eigenvalues()[i], floor);
    const Eigen::MatrixXd cov =
        es.eigenvectors() * inv_ev.asDiagonal() * es.eigenvectors().transpose();
    return (cov.diagonal() / n_scale).cwiseSqrt();
}

}  // namespace

SampleStats sample_stats(const Eigen::MatrixXd& sample, const Threshold& a) {
    const long n = sample.rows();
    const int d = a.dim();
    if (n < 1) fail(ErrorCode::EmptySample, "sample_stats: empty sample");
    if (sample.cols() != d)
        fail(ErrorCode::DimensionMismatch, "sample_stats: threshold dimension mismatch");
    const Eigen::MatrixXd w = log_matrix(sample);
    for (long i = 0; i < n; ++i)
        if ((sample.row(i).transpose().array() <= a.a.array()).all())
            fail(ErrorCode::RowInsideThreshold,
                 "sample_stats: row lies inside the threshold box");

    SampleStats s;
    s.n = n;
    Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(d, d);
    for (long i = 0; i < n; ++i) {
        const Eigen::VectorXd wi = w.row(i);
        const Eigen::VectorXd c = wi.array() - wi.mean();
        mat -= 0.5 * c * c.transpose();
    }
    s.tbar.mat = mat / static_cast<double>(n);
    s.tbar.vec = w.colwise().mean();
    const Eigen::MatrixXd centered = w.rowwise() - s.tbar.vec.transpose();
    s.vn = (centered.transpose() * centered) / static_cast<double>(n);

    s.nn.resize(d);
    s.on.resize(d);
    const Eigen::VectorXd log_a = a.a.array().log().matrix();
    for (int j = 0; j < d; ++j) {
        double cnt = 0.0, acc = 0.0;
        for (long i = 0; i < n; ++i) {
            const double lj = w(i, j) - log_a[j];
            if (lj > 0.0) {
                cnt += 1.0;
                acc += lj;
            }
        }
        s.nn[j] = cnt / static_cast<double>(n);
        s.on[j] = acc / static_cast<double>(n);
    }
    return s;
}

ExistenceDiagnostic existence_check(const SampleStats& stats) {
    const int d = static_cast<int>(stats.vn.rows());
    const Eigen::MatrixXd u = complement_basis(d);
    const Eigen::MatrixXd m = u.transpose() * stats.vn * u;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    ExistenceDiagnostic diag;
    diag.min_eigenvalue = es.eigenvalues().minCoeff();
    diag.threshold = 1e-10 * stats.vn.trace();
    diag.exists = diag.min_eigenvalue > diag.threshold;
    return diag;
}

FitReport fit_hr(const Eigen::MatrixXd& sample, const Threshold& a,
                 const FitOptions& opts) {
    const int d = a.dim();
    const SampleStats stats = sample_stats(sample, a);
    const ExistenceDiagnostic diag = existence_check(stats);
    if (!diag.exists)
        fail(ErrorCode::NoMle,
             "fit_hr: sample covariance of logs is degenerate on the complement of span(1)");

    // Standardize to threshold 1.
    Eigen::MatrixXd w = log_matrix(sample);
    const Eigen::VectorXd log_a = a.a.array().log().matrix();
    w.rowwise() -= log_a.transpose();
    const long n = w.rows();

    const StdChart chart(d);
    const Eigen::VectorXd tbar_e = tbar_coords(w, chart.pv());
    Eigen::MatrixXd q0;
    Eigen::VectorXd l0;
    default_start(w, stats.vn, q0, l0);
    const StdFitResult res = maximize_standard(tbar_e, chart, q0, l0, opts);

    const HrParams p1 = validate_hr(res.q, res.l);
    auto back = scale_transform(p1, Threshold::ones(d), a.a);

    FitReport rep;
    rep.model = ModelKind::Standard;
    rep.hr = back.first;
    rep.threshold = a;
    rep.converged = res.converged;
    rep.iterations = res.iterations;
    rep.gradient_norm = res.score_norm;

    NormConstOptions nc;
    nc.tol = opts.mvn_tol;
    nc.seed = opts.seed;
    rep.loglik = static_cast<double>(n) * res.objective - w.sum() -
                 static_cast<double>(n) * log_a.sum();
    if (opts.compute_info) {
        const ParamVector pv(d);
        rep.info = psd_project(hess_log_c(a, *rep.hr, pv, nc));
        rep.std_errors = errors_from_info(rep.info, static_cast<double>(n));
    }
    return rep;
}

namespace {

// --------------------------- generalized model -----------------------------

struct GenData {
    Eigen::MatrixXd w;      // logs of the standardized sample (threshold 1)
    Eigen::MatrixXd s2;     // (1/n) W^T W
    Eigen::VectorXd wbar;   // column means
    double w_sum = 0.0;
    long n = 0;
    int d = 0;
};

GenData gen_data(const Eigen::MatrixXd& sample, const Threshold& a) {
    GenData g;
    g.w = log_matrix(sample);
    g.w.rowwise() -= a.a.array().log().matrix().transpose();
    g.n = g.w.rows();
    g.d = static_cast<int>(g.w.cols());
    g.s2 = (g.w.transpose() * g.w) / static_cast<double>(g.n);
    g.wbar = g.w.colwise().mean();
    g.w_sum = g.w.sum();
    return g;
}

// Per-observation alpha-block objective (threshold 1):
// -1/2 a'(Q o S2)a + sum_j l_j a_j wbar_j + sum_j log a_j.
double alpha_objective(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& qs2,
                       const Eigen::VectorXd& lw) {
    return -0.5 * alpha.dot(qs2 * alpha) + lw.dot(alpha) +
           alpha.array().log().sum();
}

Eigen::VectorXd newton_alpha(const Eigen::VectorXd& alpha0, const Eigen::MatrixXd& q,
                             const GenData& g, const Eigen::VectorXd& l) {
    const Eigen::MatrixXd qs2 = q.cwiseProduct(g.s2);
    const Eigen::VectorXd lw = l.cwiseProduct(g.wbar);
    Eigen::VectorXd alpha = alpha0;
    double f = alpha_objective(alpha, qs2, lw);
    for (int it = 0; it < 100; ++it) {
        const Eigen::VectorXd grad =
            -qs2 * alpha + lw + alpha.cwiseInverse();
        if (grad.lpNorm<Eigen::Infinity>() < 1e-11 * (1.0 + std::fabs(f))) break;
        Eigen::MatrixXd hess = -qs2;
        hess.diagonal() -= alpha.array().square().inverse().matrix();
        const Eigen::VectorXd dir = -hess.ldlt().solve(grad);
        double step = 1.0;
        const double slope = grad.dot(dir);
        bool moved = false;
        while (step > 1e-14) {
            const Eigen::VectorXd cand = alpha + step * dir;
            if ((cand.array() > 0.0).all()) {
                const double fc = alpha_objective(cand, qs2, lw);
                if (fc >= f + 1e-4 * step * slope) {
                    alpha = cand;
                    f = fc;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    return alpha;
}

// Per-observation generalized log-likelihood at threshold 1 up to the fixed
// data constant -w_sum/n, as a function of the unnormalized triple.
double gen_objective(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& q,
                     const Eigen::VectorXd& l, const GenData& g,
                     const NormConstOptions& nc) {
    const Eigen::MatrixXd qs2 = q.cwiseProduct(g.s2);
    const double lc = log_c_std(q, l, nc);
    if (!std::isfinite(lc)) return kNegInf;
    return -0.5 * alpha.dot(qs2 * alpha) + l.cwiseProduct(g.wbar).dot(alpha) +
           alpha.array().log().sum() - lc;
}

struct GenTriple {
    Eigen::VectorXd alpha;
    Eigen::MatrixXd q;
    Eigen::VectorXd l;
};

// Moment initializer on the standardized sample; returns the unnormalized
// triple at threshold 1.
GenTriple moment_init_std(const GenData& g, const FitOptions& opts) {
    const int d = g.d;
    Eigen::VectorXd alpha(d);
    for (int j = 0; j < d; ++j) {
        double cnt = 0.0, acc = 0.0;
        for (long i = 0; i < g.n; ++i)
            if (g.w(i, j) > 0.0) {
                cnt += 1.0;
                acc += g.w(i, j);
            }
        if (!(acc > 0.0))
            fail(ErrorCode::MarginNotExceeded,
                 "moment_init: a margin has no exceedance above its threshold");
        alpha[j] = cnt / acc;
    }
    // Standard fit on z^alpha.
    const Eigen::MatrixXd wa = g.w * alpha.asDiagonal();
    const StdChart chart(d);
    const Eigen::VectorXd tbar_e = tbar_coords(wa, chart.pv());
    const Eigen::MatrixXd centered = wa.rowwise() - wa.colwise().mean();
    const Eigen::MatrixXd vn = (centered.transpose() * centered) / static_cast<double>(g.n);
    Eigen::MatrixXd q0;
    Eigen::VectorXd l0;
    default_start(wa, vn, q0, l0);
    FitOptions inner = opts;
    inner.compute_info = false;
    const StdFitResult res = maximize_standard(tbar_e, chart, q0, l0, inner);
    return GenTriple{alpha, res.q, res.l};
}

struct GenFitState {
    GenTriple triple;
    double objective = kNegInf;  // per-observation
    std::vector<double> trace;   // negative total log-likelihood per half-step
    int iterations = 0;
    bool converged = false;
    double score_norm = 0.0;
};

GenFitState alternate(const GenTriple& start, const GenData& g, const FitOptions& opts) {
    NormConstOptions nc;
    nc.tol = opts.mvn_tol;
    nc.seed = opts.seed;
    const StdChart chart(g.d);

    GenFitState st;
    st.triple = start;
    st.objective = gen_objective(start.alpha, start.q, start.l, g, nc);
    const double scale_n = static_cast<double>(g.n);
    st.trace.push_back(-scale_n * st.objective);

    for (int it = 0; it < opts.max_alt_iters; ++it) {
        // alpha block
        st.triple.alpha = newton_alpha(st.triple.alpha, st.triple.q, g, st.triple.l);
        const double f_half = gen_objective(st.triple.alpha, st.triple.q, st.triple.l, g, nc);
        st.trace.push_back(-scale_n * f_half);

        if ((st.triple.alpha.array() < 1e-6).any() ||
            (st.triple.alpha.array() > 1e6).any()) {
            st.converged = false;  // boundary drift, abort
            st.objective = f_half;
            st.iterations = it + 1;
            return st;
        }

        // (Q,l) block: standard fit on z^alpha, warm started
        const Eigen::MatrixXd wa = g.w * st.triple.alpha.asDiagonal();
        const Eigen::VectorXd tbar_e = tbar_coords(wa, chart.pv());
        FitOptions inner = opts;
        inner.compute_info = false;
        const StdFitResult res =
            maximize_standard(tbar_e, chart, st.triple.q, st.triple.l, inner);
        st.triple.q = res.q;
        st.triple.l = res.l;
        st.score_norm = res.score_norm;
        const double f_full = gen_objective(st.triple.alpha, st.triple.q, st.triple.l, g, nc);
        st.trace.push_back(-scale_n * f_full);
        st.iterations = it + 1;

        if (f_full - st.objective < opts.tol_ll) {
            st.objective = std::max(f_full, st.objective);
            st.converged = true;
            return st;
        }
        st.objective = f_full;
    }
    st.converged = false;
    return st;
}

// log C_a of the generalized model via reduction to the standard constant.
double gen_log_c(const Threshold& a, const Eigen::VectorXd& alpha,
                 const Eigen::MatrixXd& q, const Eigen::VectorXd& l,
                 const NormConstOptions& nc) {
    const Eigen::VectorXd la = a.a.array().log().matrix();
    const Eigen::VectorXd dla = alpha.cwiseProduct(la);
    const double lc1 = log_c_std(q, l - q * dla, nc);
    return -alpha.array().log().sum() - 0.5 * dla.dot(q * dla) + l.dot(dla) + lc1;
}

// Total generalized log-likelihood at threshold a for arbitrary (alpha,Q,l).
double gen_total_loglik(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& q,
                        const Eigen::VectorXd& l, const Eigen::MatrixXd& w_raw,
                        const Threshold& a, const NormConstOptions& nc) {
    const long n = w_raw.rows();
    const Eigen::MatrixXd s2 = (w_raw.transpose() * w_raw) / static_cast<double>(n);
    const Eigen::VectorXd wbar = w_raw.colwise().mean();
    const double lc = gen_log_c(a, alpha, q, l, nc);
    if (!std::isfinite(lc)) return kNegInf;
    const double per_obs = -0.5 * alpha.dot(q.cwiseProduct(s2) * alpha) +
                           l.cwiseProduct(wbar).dot(alpha) - wbar.sum() - lc;
    return static_cast<double>(n) * per_obs;
}

// Coordinates for the generalized information: [alpha, A part, l hyperplane].
struct GenChartPoint {
    Eigen::VectorXd alpha;
    Eigen::MatrixXd q;
    Eigen::VectorXd l;
};

GenChartPoint gen_apply(const GenHrParams& p, const Eigen::VectorXd& delta,
                        const ParamVector& pv, const Eigen::MatrixXd& u) {
    const int d = p.dim();
    GenChartPoint out;
    out.alpha = p.alpha() + delta.head(d);
    Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(d, d);
    for (int k = 0; k < pv.mat_size(); ++k)
        if (delta[d + k] != 0.0) dq += delta[d + k] * pv.mat_basis(k);
    out.q = p.q() + dq;
    out.l = p.l() + u * delta.tail(d - 1);
    return out;
}

int gen_dim(int d) { return d + (d - 1) * d / 2 + (d - 1); }

}  // namespace

GenHrParams moment_init(const Eigen::MatrixXd& sample, const Threshold& a,
                        const FitOptions& opts) {
    const GenData g = gen_data(sample, a);
    const GenTriple t = moment_init_std(g, opts);
    const double c = -t.l.sum();
    if (!(c > 0.0)) fail(ErrorCode::NoMle, "moment_init: degenerate dependence fit");
    GenHrParams p1 = validate_gen(c * t.alpha, t.q / (c * c), t.l / c);
    return gen_scale_transform(p1, Threshold::ones(g.d), a.a).first;
}

FitReport fit_gen(const Eigen::MatrixXd& sample, const Threshold& a,
                  const FitOptions& opts) {
    const int d = a.dim();
    const SampleStats stats = sample_stats(sample, a);
    if (!existence_check(stats).exists)
        fail(ErrorCode::NoMle, "fit_gen: degenerate sample covariance of logs");

    const GenData g = gen_data(sample, a);
    GenFitState best = alternate(moment_init_std(g, opts), g, opts);
    if (opts.extra_init) {
        // Bring the extra start to threshold 1 and keep the better optimum.
        const Eigen::VectorXd inv_a = a.a.cwiseInverse();
        const GenHrParams p1 = gen_scale_transform(*opts.extra_init, a, inv_a).first;
        GenFitState alt = alternate(GenTriple{p1.alpha(), p1.q(), p1.l()}, g, opts);
        if (alt.objective > best.objective) std::swap(best, alt);
    }

    const double c = -best.triple.l.sum();
    if (!(c > 0.0)) fail(ErrorCode::NoMle, "fit_gen: degenerate dependence fit");
    GenHrParams p1 = validate_gen(c * best.triple.alpha, best.triple.q / (c * c),
                                  best.triple.l / c);
    GenHrParams p_a = gen_scale_transform(p1, Threshold::ones(d), a.a).first;

    FitReport rep;
    rep.model = ModelKind::Generalized;
    rep.gen = p_a;
    rep.threshold = a;
    rep.converged = best.converged;
    rep.iterations = best.iterations;
    rep.gradient_norm = best.score_norm;
    rep.neg_loglik_trace = best.trace;
    rep.loglik = static_cast<double>(g.n) * best.objective - g.w_sum -
                 static_cast<double>(g.n) * a.a.array().log().sum();

    if (opts.compute_info) {
        NormConstOptions nc;
        nc.tol = opts.mvn_tol;
        nc.seed = opts.seed;
        const Eigen::MatrixXd w_raw = log_matrix(sample);
        const ParamVector pv(d);
        const Eigen::MatrixXd u = complement_basis(d);
        const int pd = gen_dim(d);
        auto at = [&](const Eigen::VectorXd& delta) {
            const GenChartPoint pt = gen_apply(p_a, delta, pv, u);
            if ((pt.alpha.array() <= 0.0).any()) return kNegInf;
            return gen_total_loglik(pt.alpha, pt.q, pt.l, w_raw, a, nc);
        };
        Eigen::VectorXd h = Eigen::VectorXd::Constant(pd, 2e-3);
        for (int i = 0; i < d; ++i) h[i] = 2e-3 * std::max(1.0, p_a.alpha()[i]);
        const double f0 = at(Eigen::VectorXd::Zero(pd));
        Eigen::MatrixXd hess(pd, pd);
        for (int i = 0; i < pd; ++i) {
            Eigen::VectorXd dp = Eigen::VectorXd::Zero(pd), dm = Eigen::VectorXd::Zero(pd);
            dp[i] = h[i];
            dm[i] = -h[i];
            hess(i, i) = (at(dp) - 2 * f0 + at(dm)) / (h[i] * h[i]);
            for (int j = i + 1; j < pd; ++j) {
                Eigen::VectorXd dpp = Eigen::VectorXd::Zero(pd);
                Eigen::VectorXd dpm = dpp, dmp = dpp, dmm = dpp;
                dpp[i] = h[i]; dpp[j] = h[j];
                dpm[i] = h[i]; dpm[j] = -h[j];
                dmp[i] = -h[i]; dmp[j] = h[j];
                dmm[i] = -h[i]; dmm[j] = -h[j];
                hess(i, j) = hess(j, i) =
                    (at(dpp) - at(dpm) - at(dmp) + at(dmm)) / (4 * h[i] * h[j]);
            }
        }
        rep.info = psd_project(-hess);  // observed information (total)
        rep.std_errors = errors_from_info(rep.info, 1.0);
    }
    return rep;
}

LrtResult lrt_equal_alpha(const Eigen::MatrixXd& sample, const Threshold& a,
                          const FitOptions& opts) {
    LrtResult out;
    out.fit_null = fit_hr(sample, a, opts);
    // Seed the alternation with the constrained optimum as well; the
    // generalized fit then never falls below the nested one.
    const HrParams& hr = *out.fit_null.hr;
    const double c = hr.alpha();
    FitOptions gen_opts = opts;
    gen_opts.extra_init = validate_gen(Eigen::VectorXd::Constant(hr.dim(), c),
                                       hr.q() / (c * c), hr.l() / c);
    out.fit_alt = fit_gen(sample, a, gen_opts);
    out.df = a.dim() - 1;
    const double raw = 2.0 * (out.fit_alt.loglik - out.fit_null.loglik);
    out.stat = std::max(0.0, raw);
    out.p_value = chi2_sf(out.stat, static_cast<double>(out.df));
    return out;
}

Eigen::MatrixXd fisher_info_hr(const HrParams& p, const Threshold& a,
                               const FitOptions& opts) {
    NormConstOptions nc;
    nc.tol = opts.mvn_tol;
    nc.seed = opts.seed;
    const ParamVector pv(p.dim());
    return psd_project(hess_log_c(a, p, pv, nc));
}

GenInfoEstimate fisher_info_gen(const GenHrParams& p, const Threshold& a, long n_draws,
                                std::uint64_t seed, const FitOptions& opts) {
    const int d = p.dim();
    const int pd = gen_dim(d);
    NormConstOptions nc;
    nc.tol = opts.mvn_tol;
    nc.seed = opts.seed;
    const ParamVector pv(d);
    const Eigen::MatrixXd u = complement_basis(d);

    // Shared gradient of log C_a over the chart (finite differences).
    Eigen::VectorXd grad_c(pd);
    {
        auto lc_at = [&](const Eigen::VectorXd& delta) {
            const GenChartPoint pt = gen_apply(p, delta, pv, u);
            return gen_log_c(a, pt.alpha, pt.q, pt.l, nc);
        };
        for (int i = 0; i < pd; ++i) {
            const double h = (i < d) ? 1e-5 * std::max(1.0, p.alpha()[i]) : 1e-5;
            Eigen::VectorXd dp = Eigen::VectorXd::Zero(pd), dm = Eigen::VectorXd::Zero(pd);
            dp[i] = h;
            dm[i] = -h;
            grad_c[i] = (lc_at(dp) - lc_at(dm)) / (2 * h);
        }
    }

    const Eigen::MatrixXd draws = sample_gen(n_draws, a, p, seed);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(pd, pd);
    Eigen::MatrixXd sum2 = Eigen::MatrixXd::Zero(pd, pd);
    for (long r = 0; r < n_draws; ++r) {
        const Eigen::VectorXd w = draws.row(r).transpose().array().log().matrix();
        const Eigen::VectorXd wa = p.alpha().cwiseProduct(w);
        Eigen::VectorXd score(pd);
        const Eigen::VectorXd qwa = p.q() * wa;
        for (int j = 0; j < d; ++j) score[j] = -w[j] * qwa[j] + p.l()[j] * w[j];
        const Eigen::VectorXd ca = wa.array() - wa.mean();
        const Eigen::MatrixXd tmat = -0.5 * ca * ca.transpose();
        for (int k = 0; k < pv.mat_size(); ++k)
            score[d + k] = tmat.cwiseProduct(pv.mat_basis(k)).sum();
        score.tail(d - 1) = u.transpose() * wa;
        score -= grad_c;
        const Eigen::MatrixXd op = score * score.transpose();
        sum += op;
        sum2 += op.cwiseProduct(op);
    }
    GenInfoEstimate est;
    est.info = sum / static_cast<double>(n_draws);
    const Eigen::MatrixXd var =
        sum2 / static_cast<double>(n_draws) - est.info.cwiseProduct(est.info);
    est.std_error = (var.cwiseMax(0.0) / static_cast<double>(n_draws)).cwiseSqrt();
    return est;
}

double loglik_hr(const Eigen::MatrixXd& sample, const Threshold& a, const HrParams& p,
                 const FitOptions& opts) {
    NormConstOptions nc;
    nc.tol = opts.mvn_tol;
    nc.seed = opts.seed;
    const HrDensity dens(a, p, nc);
    double total = 0.0;
    for (long i = 0; i < sample.rows(); ++i)
        total += dens.logpdf(sample.row(i).transpose());
    return total;
}

double loglik_gen(const Eigen::MatrixXd& sample, const Threshold& a, const GenHrParams& p,
                  const FitOptions& opts) {
    NormConstOptions nc;
    nc.tol = opts.mvn_tol;
    nc.seed = opts.seed;
    for (long i = 0; i < sample.rows(); ++i)
        if ((sample.row(i).transpose().array() <= a.a.array()).all()) return kNegInf;
    const Eigen::MatrixXd w = log_matrix(sample);
    return gen_total_loglik(p.alpha(), p.q(), p.l(), w, a, nc);
}

}  // namespace hrp
