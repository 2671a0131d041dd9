#include "hrp/mvn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "hrp/error.hpp"
#include "hrp/rng.hpp"

namespace hrp {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kTwoPi = 6.2831853071795864769;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// First 25 primes; sqrt fractional parts generate the Richtmyer sequence.
constexpr int kPrimes[25] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                             43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97};

}  // namespace

double std_normal_cdf(double x) {
    if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
    if (x == std::numeric_limits<double>::infinity()) return 1.0;
    if (x == -std::numeric_limits<double>::infinity()) return 0.0;
    return 0.5 * std::erfc(-x / kSqrt2);
}

double std_normal_pdf(double x) {
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double std_normal_logcdf(double x) {
    if (x > -10.0) return std::log(std_normal_cdf(x));
    // Asymptotic series for the Mills ratio, x << 0.
    const double x2 = x * x;
    const double corr = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    return -0.5 * x2 - 0.5 * std::log(kTwoPi) - std::log(-x) + std::log(corr);
}

// Wichura (1988), algorithm AS 241, PPND16.
double std_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        fail(ErrorCode::OutOfRange, "std_normal_quantile: p must be in (0,1)");
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                  6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
              1.3314166789178437745e+2) * r + 3.3871328727963666080e0);
        const double den =
            (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                  3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
              4.2313330701600911252e+1) * r + 1.0);
        return q * num / den;
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
        x = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        x = num / den;
    }
    return (q < 0.0) ? -x : x;
}

double Rng::normal() { return std_normal_quantile(uniform01()); }

namespace {

// Gauss-Legendre nodes/weights used by the bivariate routine (Genz, TVPACK).
const double kGlW6[3] = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
const double kGlX6[3] = {-0.9324695142031522, -0.6612093864662647, -0.2386191860831970};
const double kGlW12[6] = {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                          0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
const double kGlX12[6] = {-0.9815606342467191, -0.9041172563704750, -0.7699026741943050,
                          -0.5873179542866171, -0.3678314989981802, -0.1252334085114692};
const double kGlW20[10] = {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                           0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
                           0.1316886384491766,  0.1420961093183820,  0.1491729864726037,
                           0.1527533871307258};
const double kGlX20[10] = {-0.9931285991850949, -0.9639719272779138, -0.9122344282513259,
                           -0.8391169718222188, -0.7463319064601508, -0.6360536807265150,
                           -0.5108670019508271, -0.3737060887154195, -0.2277858511416451,
                           -0.07652652113349733};

// Genz's BVND: P(X > h, Y > k) for standard bivariate normal, correlation r.
double bvnd_upper(double h, double k, double r) {
    const double* w;
    const double* x;
    int lg;
    if (std::fabs(r) < 0.3) {
        lg = 3; w = kGlW6; x = kGlX6;
    } else if (std::fabs(r) < 0.75) {
        lg = 6; w = kGlW12; x = kGlX12;
    } else {
        lg = 10; w = kGlW20; x = kGlX20;
    }
    double hk = h * k;
    double bvn = 0.0;
    if (std::fabs(r) < 0.925) {
        if (std::fabs(r) > 0.0) {
            const double hs = (h * h + k * k) / 2.0;
            const double asr = std::asin(r);
            for (int i = 0; i < lg; ++i) {
                for (int is = -1; is <= 1; is += 2) {
                    const double sn = std::sin(asr * (is * x[i] + 1.0) / 2.0);
                    bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
                }
            }
            bvn = bvn * asr / (2.0 * kTwoPi);
        }
        bvn += std_normal_cdf(-h) * std_normal_cdf(-k);
    } else {
        if (r < 0.0) {
            k = -k;
            hk = -hk;
        }
        if (std::fabs(r) < 1.0) {
            const double as = (1.0 - r) * (1.0 + r);
            double a = std::sqrt(as);
            const double bs = (h - k) * (h - k);
            const double c = (4.0 - hk) / 8.0;
            const double d = (12.0 - hk) / 16.0;
            double asr = -(bs / as + hk) / 2.0;
            if (asr > -100.0)
                bvn = a * std::exp(asr) *
                      (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 +
                       c * d * as * as / 5.0);
            if (-hk < 100.0) {
                const double b = std::sqrt(bs);
                bvn -= std::exp(-hk / 2.0) * std::sqrt(kTwoPi) *
                       std_normal_cdf(-b / a) * b *
                       (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
            }
            a /= 2.0;
            for (int i = 0; i < lg; ++i) {
                for (int is = -1; is <= 1; is += 2) {
                    const double xs0 = a * (is * x[i] + 1.0);
                    const double xs = xs0 * xs0;
                    const double rs = std::sqrt(1.0 - xs);
                    asr = -(bs / xs + hk) / 2.0;
                    if (asr > -100.0) {
                        const double sp = 1.0 + c * xs * (1.0 + d * xs);
                        const double ep =
                            std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs;
                        bvn += a * w[i] * std::exp(asr) * (ep - sp);
                    }
                }
            }
            bvn = -bvn / kTwoPi;
        }
        if (r > 0.0) {
            bvn += std_normal_cdf(-std::max(h, k));
        } else {
            bvn = -bvn;
            if (k > h) bvn += std_normal_cdf(k) - std_normal_cdf(h);
        }
    }
    return std::clamp(bvn, 0.0, 1.0);
}

}  // namespace

double bvn_cdf(double h, double k, double rho) {
    if (!(rho >= -1.0 && rho <= 1.0))
        fail(ErrorCode::OutOfRange, "bvn_cdf: correlation outside [-1,1]");
    if (std::isnan(h) || std::isnan(k)) return std::numeric_limits<double>::quiet_NaN();
    if (h == std::numeric_limits<double>::infinity()) return std_normal_cdf(k);
    if (k == std::numeric_limits<double>::infinity()) return std_normal_cdf(h);
    if (h == -std::numeric_limits<double>::infinity() ||
        k == -std::numeric_limits<double>::infinity())
        return 0.0;
    if (rho == 1.0) return std_normal_cdf(std::min(h, k));
    if (rho == -1.0) return std::max(0.0, std_normal_cdf(h) - std_normal_cdf(-k));
    return bvnd_upper(-h, -k, rho);
}

namespace {

struct GenzTransform {
    Eigen::MatrixXd chol;   // reordered lower Cholesky of the correlation
    Eigen::VectorXd limit;  // reordered standardized upper limits
    int k = 0;
};

// Cholesky factorization with the Genz-Bretz reordering: at each step pick
// the variable with the smallest conditional probability so the outer
// integration directions carry the most truncation.
GenzTransform prepare_transform(const Eigen::MatrixXd& cov, const Eigen::VectorXd& b) {
    const int k = static_cast<int>(b.size());
    Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
    for (int i = 0; i < k; ++i)
        if (!(sd[i] > 0.0)) fail(ErrorCode::CovNotPD, "mvn_cdf: nonpositive variance");
    Eigen::MatrixXd c = cov;
    Eigen::VectorXd bl = b;
    for (int i = 0; i < k; ++i) {
        bl[i] /= sd[i];
        for (int j = 0; j < k; ++j) c(i, j) /= sd[i] * sd[j];
    }

    GenzTransform t;
    t.k = k;
    t.chol = Eigen::MatrixXd::Zero(k, k);
    t.limit = bl;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(k);  // truncated conditional means
    Eigen::MatrixXd& L = t.chol;
    for (int i = 0; i < k; ++i) {
        int best = i;
        double best_p = 2.0;
        for (int j = i; j < k; ++j) {
            double s2 = c(j, j);
            double num = t.limit[j];
            for (int l = 0; l < i; ++l) {
                s2 -= L(j, l) * L(j, l);
                num -= L(j, l) * y[l];
            }
            if (s2 < 1e-14) continue;
            const double p = std_normal_cdf(num / std::sqrt(s2));
            if (p < best_p) {
                best_p = p;
                best = j;
            }
        }
        if (best != i) {
            c.row(i).swap(c.row(best));
            c.col(i).swap(c.col(best));
            std::swap(t.limit[i], t.limit[best]);
            L.row(i).swap(L.row(best));
        }
        double s2 = c(i, i);
        for (int l = 0; l < i; ++l) s2 -= L(i, l) * L(i, l);
        if (s2 <= 1e-12)
            fail(ErrorCode::CovNotPD, "mvn_cdf: covariance not positive definite");
        L(i, i) = std::sqrt(s2);
        for (int j = i + 1; j < k; ++j) {
            double v = c(j, i);
            for (int l = 0; l < i; ++l) v -= L(j, l) * L(i, l);
            L(j, i) = v / L(i, i);
        }
        double num = t.limit[i];
        for (int l = 0; l < i; ++l) num -= L(i, l) * y[l];
        const double u = num / L(i, i);
        const double phi_u = std::max(std_normal_cdf(u), 1e-300);
        y[i] = -std_normal_pdf(u) / phi_u;  // E[Z | Z <= u]
    }
    return t;
}

// Separation-of-variables integrand over the unit cube of dimension k-1.
double genz_integrand(const GenzTransform& t, const double* w) {
    const int k = t.k;
    double y[32];
    double e = std_normal_cdf(t.limit[0] / t.chol(0, 0));
    double prob = e;
    for (int i = 1; i < k; ++i) {
        const double u = std::clamp(w[i - 1] * e, 1e-16, 1.0 - 1e-16);
        y[i - 1] = std_normal_quantile(u);
        double num = t.limit[i];
        for (int l = 0; l < i; ++l) num -= t.chol(i, l) * y[l];
        e = std_normal_cdf(num / t.chol(i, i));
        prob *= e;
    }
    return prob;
}

}  // namespace

CdfEstimate mvn_cdf(const MvnSpec& spec, const MvnOptions& opts) {
    const int k = static_cast<int>(spec.upper.size());
    if (spec.mean.size() != k || spec.cov.rows() != k || spec.cov.cols() != k)
        fail(ErrorCode::DimensionMismatch, "mvn_cdf: inconsistent dimensions");
    if (!(opts.tol > 0.0)) fail(ErrorCode::OutOfRange, "mvn_cdf: tol must be positive");
    if (k > 25) fail(ErrorCode::OutOfRange, "mvn_cdf: dimension above 25 unsupported");

    CdfEstimate est;
    if (k == 0) {
        est.value = 1.0;
        return est;
    }
    const Eigen::VectorXd b = spec.upper - spec.mean;
    if (k == 1) {
        const double sd = std::sqrt(spec.cov(0, 0));
        if (!(sd > 0.0)) fail(ErrorCode::CovNotPD, "mvn_cdf: nonpositive variance");
        est.value = std_normal_cdf(b[0] / sd);
        est.abs_error = 1e-15;
        return est;
    }
    if (k == 2) {
        const double s1 = std::sqrt(spec.cov(0, 0));
        const double s2 = std::sqrt(spec.cov(1, 1));
        if (!(s1 > 0.0) || !(s2 > 0.0))
            fail(ErrorCode::CovNotPD, "mvn_cdf: nonpositive variance");
        const double rho = spec.cov(0, 1) / (s1 * s2);
        if (!(rho > -1.0 && rho < 1.0))
            fail(ErrorCode::CovNotPD, "mvn_cdf: degenerate correlation");
        est.value = bvn_cdf(b[0] / s1, b[1] / s2, rho);
        est.abs_error = 5e-15;
        return est;
    }

    const GenzTransform t = prepare_transform(spec.cov, b);
    const int dim = k - 1;
    const int m = opts.n_replicates;

    // Richtmyer generators and per-replicate random shifts.
    std::vector<double> gen(dim);
    for (int i = 0; i < dim; ++i) {
        const double s = std::sqrt(static_cast<double>(kPrimes[i]));
        gen[i] = s - std::floor(s);
    }
    std::vector<std::vector<double>> shift(m, std::vector<double>(dim));
    for (int r = 0; r < m; ++r) {
        Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(r)));
        for (int i = 0; i < dim; ++i) shift[r][i] = rng.uniform01_halfopen();
    }

    std::vector<double> sums(m, 0.0);
    long n_done = 0;
    long batch = 256;
    double w[32];
    while (true) {
        for (int r = 0; r < m; ++r) {
            double s = sums[r];
            for (long j = n_done + 1; j <= n_done + batch; ++j) {
                for (int i = 0; i < dim; ++i) {
                    double v = j * gen[i] + shift[r][i];
                    v -= std::floor(v);
                    w[i] = std::fabs(2.0 * v - 1.0);  // baker transform
                }
                s += genz_integrand(t, w);
            }
            sums[r] = s;
        }
        n_done += batch;

        double mean = 0.0;
        for (int r = 0; r < m; ++r) mean += sums[r] / n_done;
        mean /= m;
        double var = 0.0;
        for (int r = 0; r < m; ++r) {
            const double d = sums[r] / n_done - mean;
            var += d * d;
        }
        var /= (m - 1);
        const double err = 3.0 * std::sqrt(var / m);

        est.value = std::clamp(mean, 0.0, 1.0);
        est.abs_error = err;
        est.n_points = n_done * m;
        if (err <= opts.tol ||
            (opts.rel_tol > 0.0 && err <= opts.rel_tol * est.value)) {
            est.converged = true;
            return est;
        }
        if (n_done >= opts.max_points) {
            est.converged = false;  // budget exhausted, best estimate returned
            return est;
        }
        batch = std::min(n_done, opts.max_points - n_done);
    }
}

}  // namespace hrp
