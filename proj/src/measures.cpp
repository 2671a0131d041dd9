#include "hrp/measures.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "hrp/error.hpp"
#include "hrp/rng.hpp"

namespace hrp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Adaptive Simpson on [lo, hi], relative tolerance.
double adaptive_simpson(const std::function<double(double)>& f, double lo, double hi,
                        double rel_tol) {
    struct Seg {
        double a, b, fa, fm, fb, whole;
    };
    auto simpson = [&](double a, double b, double fa, double fm, double fb) {
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    };
    std::vector<Seg> stack;
    const double m0 = 0.5 * (lo + hi);
    const double fa0 = f(lo), fm0 = f(m0), fb0 = f(hi);
    stack.push_back({lo, hi, fa0, fm0, fb0, simpson(lo, hi, fa0, fm0, fb0)});
    double total = 0.0;
    double scale = std::fabs(stack.back().whole) + 1e-300;
    int depth_guard = 0;
    while (!stack.empty()) {
        if (++depth_guard > 200000)
            fail(ErrorCode::Budget, "adaptive_simpson: refinement budget exhausted");
        const Seg s = stack.back();
        stack.pop_back();
        const double m = 0.5 * (s.a + s.b);
        const double lm = 0.5 * (s.a + m), rm = 0.5 * (m + s.b);
        const double flm = f(lm), frm = f(rm);
        const double left = simpson(s.a, m, s.fa, flm, s.fm);
        const double right = simpson(m, s.b, s.fm, frm, s.fb);
        if (std::fabs(left + right - s.whole) <= 15.0 * rel_tol * scale ||
            (s.b - s.a) < 1e-12) {
            total += left + right + (left + right - s.whole) / 15.0;
        } else {
            stack.push_back({s.a, m, s.fa, flm, s.fm, left});
            stack.push_back({m, s.b, s.fm, frm, s.fb, right});
        }
    }
    return total;
}

void require_positive(const Eigen::VectorXd& v, const char* what) {
    if ((v.array() <= 0.0).any()) fail(ErrorCode::ConstraintViolation, what);
}

Eigen::MatrixXd chol_of(const Eigen::MatrixXd& sigma, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (sigma + sigma.transpose()));
    if (llt.info() != Eigen::Success) fail(ErrorCode::CovNotPD, what);
    return llt.matrixL();
}

}  // namespace

MeasureModel::MeasureModel(SpectralFamily family, double alpha)
    : family_(std::move(family)), alpha_(alpha) {
    if (!(alpha > 0.0))
        fail(ErrorCode::ConstraintViolation, "MeasureModel: alpha must be positive");
    std::visit(
        [&](const auto& fam) {
            using T = std::decay_t<decltype(fam)>;
            if constexpr (std::is_same_v<T, GaussianSpec>) {
                dim_ = static_cast<int>(fam.sigma.rows());
                chol_ = chol_of(fam.sigma, "Gaussian spectral covariance not PD");
            } else if constexpr (std::is_same_v<T, LogNormalSpec>) {
                dim_ = static_cast<int>(fam.m.size());
                if (fam.sigma.rows() != dim_ || fam.sigma.cols() != dim_)
                    fail(ErrorCode::DimensionMismatch, "LogNormal: dimension mismatch");
                chol_ = chol_of(fam.sigma, "LogNormal spectral covariance not PD");
            } else if constexpr (std::is_same_v<T, FrechetSpec>) {
                dim_ = static_cast<int>(fam.lambda.size());
                require_positive(fam.lambda, "Frechet scales must be positive");
                if (!(fam.beta > 0.0))
                    fail(ErrorCode::ConstraintViolation, "Frechet shape must be positive");
            } else if constexpr (std::is_same_v<T, WeibullSpec>) {
                dim_ = static_cast<int>(fam.lambda.size());
                require_positive(fam.lambda, "Weibull scales must be positive");
                if (!(fam.beta > 0.0))
                    fail(ErrorCode::ConstraintViolation, "Weibull shape must be positive");
            } else {
                dim_ = static_cast<int>(fam.theta.size());
                if (fam.beta.size() != dim_)
                    fail(ErrorCode::DimensionMismatch, "Gamma: dimension mismatch");
                require_positive(fam.theta, "Gamma shapes must be positive");
                require_positive(fam.beta, "Gamma rates must be positive");
            }
        },
        family_);
    if (dim_ < 2) fail(ErrorCode::OutOfRange, "MeasureModel: dimension must be >= 2");

    if (const auto* ln = std::get_if<LogNormalSpec>(&family_)) {
        HrParams params = from_spectral(ln->m, ln->sigma, alpha_);
        // Density constant, rebuilt from scratch (not the displayed form):
        // log C = log alpha - (d-1)/2 log 2pi - 1/2 log|Sigma| - 1/2 log(1'S1)
        //         - 1/2 m'Sm + (m'S1 + alpha)^2 / (2 1'S1),   S = Sigma^{-1}.
        const int d = dim_;
        Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (ln->sigma + ln->sigma.transpose()));
        const Eigen::VectorXd s1 = llt.solve(Eigen::VectorXd::Ones(d));
        const Eigen::VectorXd sm = llt.solve(ln->m);
        const double t = s1.sum();
        double log_det = 0.0;
        const Eigen::MatrixXd lmat = llt.matrixL();
        for (int i = 0; i < d; ++i) log_det += 2.0 * std::log(lmat(i, i));
        const double ms1 = ln->m.dot(s1);
        const double log_c = std::log(alpha_) - 0.5 * (d - 1) * kLog2Pi - 0.5 * log_det -
                             0.5 * std::log(t) - 0.5 * ln->m.dot(sm) +
                             0.5 * (ms1 + alpha_) * (ms1 + alpha_) / t;

        // One-time cross-check against quadrature of the mixture integral
        // at a generic point.
        const Eigen::VectorXd z0 = ln->m.array().exp().matrix();
        const Eigen::VectorXd w0 = ln->m;
        const double quad_form = -0.5 * w0.dot(params.q() * w0) + params.l().dot(w0);
        const double log_closed = log_c + quad_form - w0.sum();
        const double center = -alpha_ / t;
        const double halfwidth = 50.0 / std::sqrt(t) + 2.0 * std::fabs(center);
        auto integrand = [&](double v) {
            // log-normal density of z0 * exp(-v), times alpha e^{-(d+alpha)v}
            const Eigen::VectorXd dev = w0 - Eigen::VectorXd::Constant(d, v) - ln->m;
            const double expo = -0.5 * dev.dot(llt.solve(dev));
            const double log_fz = -0.5 * d * kLog2Pi - 0.5 * log_det + expo -
                                  (w0.sum() - d * v);
            return alpha_ * std::exp(log_fz - (d + alpha_) * v);
        };
        const double quad =
            adaptive_simpson(integrand, center - halfwidth, center + halfwidth, 1e-10);
        if (!(std::fabs(quad / std::exp(log_closed) - 1.0) < 1e-6))
            fail(ErrorCode::ConstraintViolation,
                 "LogNormal density constant failed its quadrature validation");
        ln_ = LogNormalDerived{std::move(params), log_c};
    }
}

namespace {

double log_lambda(const MeasureModel& model, const Eigen::VectorXd& z) {
    const int d = model.dim();
    const double alpha = model.alpha();
    if (z.size() != d) fail(ErrorCode::DimensionMismatch, "lambda_density: wrong dimension");

    if (const auto* g = std::get_if<GaussianSpec>(&model.family())) {
        if (z.isZero(0.0)) fail(ErrorCode::OutOfSupport, "lambda_density: z must be nonzero");
        Eigen::LLT<Eigen::MatrixXd> llt(g->sigma);
        const double s = z.dot(llt.solve(z));
        double log_det = 0.0;
        const Eigen::MatrixXd lmat = llt.matrixL();
        for (int i = 0; i < d; ++i) log_det += 2.0 * std::log(lmat(i, i));
        // The Weibull-moment reduction of the mixture integral gives the
        // constant alpha/2 (confirmed by quadrature):
        // lambda(z) = (alpha/2) (2pi)^{-d/2} |Sigma|^{-1/2} Gamma((alpha+d)/2)
        //             (z'S z / 2)^{-(alpha+d)/2}.
        return std::log(0.5 * alpha) - 0.5 * d * kLog2Pi - 0.5 * log_det +
               std::lgamma(0.5 * (alpha + d)) - 0.5 * (alpha + d) * std::log(0.5 * s);
    }
    if ((z.array() <= 0.0).any())
        fail(ErrorCode::OutOfSupport, "lambda_density: z must be strictly positive");
    const Eigen::VectorXd w = z.array().log().matrix();

    if (std::get_if<LogNormalSpec>(&model.family())) {
        const LogNormalDerived& ln = *model.lognormal();
        return ln.log_c - 0.5 * w.dot(ln.params.q() * w) + ln.params.l().dot(w) - w.sum();
    }
    if (const auto* f = std::get_if<FrechetSpec>(&model.family())) {
        if (!(f->beta > alpha))
            fail(ErrorCode::ConstraintViolation, "Frechet family requires beta > alpha");
        const double beta = f->beta;
        double log_prod = 0.0, s = 0.0;
        for (int i = 0; i < d; ++i) {
            log_prod += beta * std::log(f->lambda[i]) - (beta + 1.0) * w[i];
            s += std::pow(z[i] / f->lambda[i], -beta);
        }
        return std::log(alpha) + (d - 1) * std::log(beta) + std::lgamma(d - alpha / beta) +
               log_prod + (alpha / beta - d) * std::log(s);
    }
    if (const auto* wb = std::get_if<WeibullSpec>(&model.family())) {
        if (!(alpha > wb->beta))
            fail(ErrorCode::ConstraintViolation, "Weibull family requires alpha > beta");
        const double beta = wb->beta;
        double log_prod = 0.0, s = 0.0;
        for (int i = 0; i < d; ++i) {
            log_prod += (beta - 1.0) * w[i] - beta * std::log(wb->lambda[i]);
            s += std::pow(z[i] / wb->lambda[i], beta);
        }
        return std::log(alpha) + (d - 1) * std::log(beta) + std::lgamma(d + alpha / beta) +
               log_prod + (-alpha / beta - d) * std::log(s);
    }
    const auto& gm = std::get<GammaSpec>(model.family());
    const double theta_sum = gm.theta.sum();
    double log_prod = 0.0;
    for (int i = 0; i < d; ++i)
        log_prod += gm.theta[i] * std::log(gm.beta[i]) + (gm.theta[i] - 1.0) * w[i] -
                    std::lgamma(gm.theta[i]);
    return std::log(alpha) + std::lgamma(alpha + theta_sum) -
           (theta_sum + alpha) * std::log(gm.beta.dot(z)) + log_prod;
}

}  // namespace

double lambda_density(const MeasureModel& model, const Eigen::VectorXd& z) {
    return std::exp(log_lambda(model, z));
}

namespace {

Eigen::VectorXd draw_spectral(const MeasureModel& model, const Eigen::MatrixXd& chol,
                              Rng& rng);

// Monte Carlo E[(max_i (Z_i)_+ / x_i)^alpha] with standard error.
ValueWithError tail_v_mc(const MeasureModel& model, const Eigen::VectorXd& x,
                         const MeasureMcOptions& mc) {
    double sum = 0.0, sum2 = 0.0;
    Eigen::MatrixXd chol;
    if (const auto* g = std::get_if<GaussianSpec>(&model.family()))
        chol = chol_of(g->sigma, "Gaussian spectral covariance not PD");
    for (long j = 0; j < mc.n_draws; ++j) {
        Rng rng(derive_seed(mc.seed, static_cast<std::uint64_t>(j)));
        const Eigen::VectorXd z = draw_spectral(model, chol, rng);
        double m = 0.0;
        for (int i = 0; i < model.dim(); ++i) m = std::max(m, z[i] / x[i]);
        const double v = std::pow(m, model.alpha());
        sum += v;
        sum2 += v * v;
    }
    const double n = static_cast<double>(mc.n_draws);
    ValueWithError out;
    out.value = sum / n;
    out.abs_error = std::sqrt(std::max(0.0, sum2 / n - out.value * out.value) / n);
    return out;
}

}  // namespace

ValueWithError tail_V(const MeasureModel& model, const Eigen::VectorXd& x,
                      const MeasureMcOptions& mc) {
    const int d = model.dim();
    const double alpha = model.alpha();
    if (x.size() != d) fail(ErrorCode::DimensionMismatch, "tail_V: wrong dimension");
    if ((x.array() <= 0.0).any())
        fail(ErrorCode::OutOfSupport, "tail_V: x must be strictly positive");

    if (const auto* f = std::get_if<FrechetSpec>(&model.family())) {
        if (!(f->beta > alpha))
            fail(ErrorCode::ConstraintViolation, "Frechet family requires beta > alpha");
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += std::pow(x[i] / f->lambda[i], -f->beta);
        ValueWithError out;
        out.value = std::tgamma(1.0 - alpha / f->beta) * std::pow(s, alpha / f->beta);
        out.abs_error = 8e-16 * out.value;
        return out;
    }
    if (const auto* wb = std::get_if<WeibullSpec>(&model.family())) {
        if (!(alpha > wb->beta))
            fail(ErrorCode::ConstraintViolation, "Weibull family requires alpha > beta");
        if (d > 15)
            fail(ErrorCode::OutOfRange, "Weibull tail_V: inclusion-exclusion limited to d <= 15");
        double sum = 0.0;
        for (unsigned mask = 1; mask < (1u << d); ++mask) {
            double s = 0.0;
            int bits = 0;
            for (int i = 0; i < d; ++i)
                if (mask & (1u << i)) {
                    s += std::pow(x[i] / wb->lambda[i], wb->beta);
                    ++bits;
                }
            const double term = std::pow(s, -alpha / wb->beta);
            sum += (bits % 2 == 1) ? term : -term;
        }
        ValueWithError out;
        out.value = std::tgamma(1.0 + alpha / wb->beta) * sum;
        out.abs_error = 1e-14 * std::fabs(out.value) * (1u << d);
        return out;
    }
    if (std::get_if<LogNormalSpec>(&model.family())) {
        // V(x) = C * C_x(Q,l): same face decomposition as the normalization
        // constant, evaluated by the shared routine.
        const LogNormalDerived& ln = *model.lognormal();
        NormConstOptions opts;
        opts.seed = mc.seed;
        const LogNormConst nc = log_norm_const(Threshold(x), ln.params, opts);
        ValueWithError out;
        out.value = std::exp(ln.log_c + nc.log_value);
        out.abs_error = nc.rel_error * out.value;
        return out;
    }
    return tail_v_mc(model, x, mc);
}

double ev_copula(const MeasureModel& model, const Eigen::VectorXd& u,
                 const MeasureMcOptions& mc) {
    const int d = model.dim();
    const double alpha = model.alpha();
    if (u.size() != d) fail(ErrorCode::DimensionMismatch, "ev_copula: wrong dimension");
    if (!((u.array() > 0.0).all() && (u.array() < 1.0).all()))
        fail(ErrorCode::OutOfRange, "ev_copula: u must lie in (0,1)^d");

    // Frechet scales sigma_i with sigma_i^alpha = E[(Z_i)_+^alpha].
    Eigen::VectorXd sigma(d);
    if (const auto* g = std::get_if<GaussianSpec>(&model.family())) {
        // E[(N(0,s^2))_+^alpha] = s^alpha 2^{alpha/2} Gamma((alpha+1)/2) / (2 sqrt(pi))
        const double half_moment = std::exp(0.5 * alpha * std::log(2.0) +
                                            std::lgamma(0.5 * (alpha + 1.0))) /
                                   (2.0 * std::sqrt(M_PI));
        for (int i = 0; i < d; ++i)
            sigma[i] = std::sqrt(g->sigma(i, i)) * std::pow(half_moment, 1.0 / alpha);
    } else if (const auto* ln = std::get_if<LogNormalSpec>(&model.family())) {
        for (int i = 0; i < d; ++i)
            sigma[i] = std::exp(ln->m[i] + 0.5 * alpha * ln->sigma(i, i));
    } else if (const auto* f = std::get_if<FrechetSpec>(&model.family())) {
        if (!(f->beta > alpha))
            fail(ErrorCode::ConstraintViolation, "Frechet family requires beta > alpha");
        const double g1 = std::tgamma(1.0 - alpha / f->beta);
        for (int i = 0; i < d; ++i) sigma[i] = f->lambda[i] * std::pow(g1, 1.0 / alpha);
    } else if (const auto* wb = std::get_if<WeibullSpec>(&model.family())) {
        if (!(alpha > wb->beta))
            fail(ErrorCode::ConstraintViolation, "Weibull family requires alpha > beta");
        const double g1 = std::tgamma(1.0 + alpha / wb->beta);
        for (int i = 0; i < d; ++i) sigma[i] = wb->lambda[i] * std::pow(g1, 1.0 / alpha);
    } else {
        const auto& gm = std::get<GammaSpec>(model.family());
        for (int i = 0; i < d; ++i)
            sigma[i] = std::exp((std::lgamma(gm.theta[i] + alpha) -
                                 std::lgamma(gm.theta[i])) /
                                alpha) /
                       gm.beta[i];
    }

    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i)
        x[i] = sigma[i] * std::pow(-std::log(u[i]), -1.0 / alpha);
    const double v = tail_V(model, x, mc).value;
    return std::clamp(std::exp(-v), 0.0, 1.0);
}

namespace {

// Marsaglia-Tsang gamma sampler (shape, unit rate).
double draw_gamma(double shape, Rng& rng) {
    if (shape < 1.0) {
        const double u = rng.uniform01();
        return draw_gamma(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    while (true) {
        double x, v;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform01();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

Eigen::VectorXd draw_spectral(const MeasureModel& model, const Eigen::MatrixXd& chol,
                              Rng& rng) {
    const int d = model.dim();
    Eigen::VectorXd z(d);
    if (const auto* g = std::get_if<GaussianSpec>(&model.family())) {
        (void)g;
        Eigen::VectorXd n(d);
        for (int i = 0; i < d; ++i) n[i] = rng.normal();
        z = chol * n;
    } else if (const auto* ln = std::get_if<LogNormalSpec>(&model.family())) {
        Eigen::VectorXd n(d);
        for (int i = 0; i < d; ++i) n[i] = rng.normal();
        z = (ln->m + chol * n).array().exp().matrix();
    } else if (const auto* f = std::get_if<FrechetSpec>(&model.family())) {
        for (int i = 0; i < d; ++i)
            z[i] = f->lambda[i] * std::pow(-std::log(rng.uniform01()), -1.0 / f->beta);
    } else if (const auto* wb = std::get_if<WeibullSpec>(&model.family())) {
        for (int i = 0; i < d; ++i)
            z[i] = wb->lambda[i] * std::pow(-std::log(rng.uniform01()), 1.0 / wb->beta);
    } else {
        const auto& gm = std::get<GammaSpec>(model.family());
        for (int i = 0; i < d; ++i) z[i] = draw_gamma(gm.theta[i], rng) / gm.beta[i];
    }
    return z;
}

}  // namespace

Eigen::MatrixXd breiman_sample(const MeasureModel& model, long n, std::uint64_t seed,
                               const std::optional<Eigen::VectorXd>& nonstandard_alpha) {
    if (n < 0) fail(ErrorCode::OutOfRange, "breiman_sample: n must be nonnegative");
    const int d = model.dim();
    if (nonstandard_alpha) {
        if (nonstandard_alpha->size() != d)
            fail(ErrorCode::DimensionMismatch, "breiman_sample: alpha vector dimension");
        if ((nonstandard_alpha->array() <= 0.0).any())
            fail(ErrorCode::ConstraintViolation, "breiman_sample: alpha must be positive");
    }
    Eigen::MatrixXd out(n, d);
    Eigen::MatrixXd chol = model.chol_;
    for (long r = 0; r < n; ++r) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
        const double u = rng.uniform01();
        const Eigen::VectorXd z = draw_spectral(model, chol, rng);
        if (nonstandard_alpha) {
            const double radius = 1.0 / u;  // 1-Pareto
            for (int i = 0; i < d; ++i)
                out(r, i) = std::pow(radius, 1.0 / (*nonstandard_alpha)[i]) * z[i];
        } else {
            const double radius = std::pow(u, -1.0 / model.alpha());
            out.row(r) = radius * z.transpose();
        }
    }
    return out;
}

double empirical_exceedance_ratio(const Eigen::MatrixXd& sample, const Eigen::VectorXd& x,
                                  long k) {
    const long n = sample.rows();
    if (n == 0) fail(ErrorCode::EmptySample, "empirical_exceedance_ratio: empty sample");
    if (k < 1 || k > n)
        fail(ErrorCode::OutOfRange, "empirical_exceedance_ratio: k must be in [1, n]");
    if (x.size() != sample.cols())
        fail(ErrorCode::DimensionMismatch, "empirical_exceedance_ratio: x dimension");
    if ((x.array() < 0.0).any())
        fail(ErrorCode::OutOfRange, "empirical_exceedance_ratio: x must be nonnegative");

    std::vector<long> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<double> radius(n);
    for (long i = 0; i < n; ++i) radius[i] = sample.row(i).maxCoeff();
    std::nth_element(idx.begin(), idx.begin() + (k - 1), idx.end(),
                     [&](long a, long b) {
                         return radius[a] != radius[b] ? radius[a] > radius[b] : a < b;
                     });
    const double scale = radius[idx[k - 1]];
    long count = 0;
    for (long t = 0; t < k; ++t) {
        const long i = idx[t];
        bool escapes = false;
        for (int j = 0; j < sample.cols(); ++j)
            if (sample(i, j) / scale > x[j]) {
                escapes = true;
                break;
            }
        if (escapes) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(k);
}

}  // namespace hrp
