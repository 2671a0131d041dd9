#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hrp/error.hpp"
#include "hrp/mvn.hpp"
#include "hrp/pareto.hpp"
#include "hrp/rng.hpp"
#include "hrp/special.hpp"
#include "oracle_utils.hpp"

using namespace hrp;

namespace {

Eigen::MatrixXd q2(double c) {
    Eigen::MatrixXd q(2, 2);
    q << c, -c, -c, c;
    return q;
}

Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

// Closed form of the 2-d normalization constant on threshold (1,1).
double norm_const_2d(double c, double l1, double l2) {
    const double alpha = -(l1 + l2);
    return std::sqrt(2.0 * M_PI) / (alpha * std::sqrt(c)) *
           (std::exp(l1 * l1 / (2.0 * c)) * std_normal_cdf(-l1 / std::sqrt(c)) +
            std::exp(l2 * l2 / (2.0 * c)) * std_normal_cdf(-l2 / std::sqrt(c)));
}

}  // namespace

TEST_CASE("norm_const matches the closed 2-d form") {
    Rng rng(15);
    for (int rep = 0; rep < 20; ++rep) {
        const double c = 0.3 + 2.0 * rng.uniform01();
        const double l1 = -1.5 * rng.uniform01() - 0.1;
        const double l2 = -1.5 * rng.uniform01() - 0.1;
        const HrParams p = validate_hr(q2(c), vec2(l1, l2));
        const ValueWithError nc = norm_const(Threshold::ones(2), p);
        CHECK(nc.value == doctest::Approx(norm_const_2d(c, l1, l2)).epsilon(1e-12));
    }
    // pinned instance
    const ValueWithError nc =
        norm_const(Threshold::ones(2), validate_hr(q2(1.0), vec2(-0.5, -0.5)));
    CHECK(nc.value == doctest::Approx(norm_const_2d(1.0, -0.5, -0.5)).epsilon(1e-12));
}

TEST_CASE("norm_const against importance sampling") {
    Rng rng(23);
    for (int d : {2, 3, 4}) {
        const HrParams p = oracle::random_hr_params(rng, d, 1.2);
        Eigen::VectorXd av(d);
        for (int i = 0; i < d; ++i) av[i] = std::exp(0.3 * rng.normal());
        const Threshold a(av);
        const ValueWithError nc = norm_const(a, p);
        const oracle::IsEstimate is = oracle::norm_const_is(p, a, 200000, 99 + d);
        CHECK(std::fabs(nc.value - is.value) < 3.0 * is.std_error + nc.abs_error);
    }
}

TEST_CASE("norm_const scaling identities") {
    Rng rng(31);
    for (int rep = 0; rep < 10; ++rep) {
        const int d = 2 + rep % 3;
        const HrParams p = oracle::random_hr_params(rng, d, 0.9);
        const Threshold a(Eigen::VectorXd::Ones(d));
        Eigen::VectorXd u(d);
        for (int i = 0; i < d; ++i) u[i] = std::exp(0.4 * rng.normal());
        const Eigen::VectorXd log_u = u.array().log().matrix();

        const double c0 = norm_const(a, p).value;
        auto moved = scale_transform(p, a, u);
        const double c1 = norm_const(moved.second, moved.first).value;
        const double factor = std::exp(0.5 * log_u.dot(p.q() * log_u) + p.l().dot(log_u));
        CHECK(c1 == doctest::Approx(factor * c0).epsilon(1e-8));

        const double beta = 0.5 + rng.uniform01();
        auto pow_moved = power_transform(p, a, beta);
        const double c2 = norm_const(pow_moved.second, pow_moved.first).value;
        CHECK(c2 == doctest::Approx(std::pow(beta, d) * c0).epsilon(1e-8));
    }
}

TEST_CASE("log_density support and change of variables") {
    const HrParams p = validate_hr(q2(1.0), vec2(-0.5, -0.5));
    const Threshold a(vec2(1.0, 2.0));
    const HrDensity dens(a, p);
    CHECK(dens.logpdf(vec2(0.5, 1.0)) == -std::numeric_limits<double>::infinity());
    CHECK(std::isfinite(dens.logpdf(vec2(0.5, 3.0))));
    CHECK_THROWS_AS((void)dens.logpdf(vec2(-1.0, 3.0)), Error);

    // power-transform consistency
    const double beta = 1.7;
    auto moved = power_transform(p, a, beta);
    const HrDensity dens_pow(moved.second, moved.first);
    Rng rng(2);
    for (int rep = 0; rep < 10; ++rep) {
        const Eigen::VectorXd z = vec2(std::exp(rng.normal()), 2.0 * std::exp(rng.normal()));
        const double lhs = dens.logpdf(z);
        Eigen::VectorXd zb(2);
        double log_jac = 0.0;
        for (int i = 0; i < 2; ++i) {
            zb[i] = std::pow(z[i], beta);
            log_jac += std::log(beta) + (beta - 1.0) * std::log(z[i]);
        }
        const double rhs = dens_pow.logpdf(zb) + log_jac;
        if (std::isfinite(lhs) || std::isfinite(rhs))
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }
}

TEST_CASE("density integrates to one (importance sampling)") {
    Rng rng(41);
    const int d = 3;
    const HrParams p = oracle::random_hr_params(rng, d, 1.1);
    const Threshold a(Eigen::VectorXd::Ones(d));
    const HrDensity dens(a, p);

    const Eigen::MatrixXd u = complement_basis(d);
    const Eigen::MatrixXd m = u.transpose() * p.q() * u;
    const Eigen::VectorXd bvec = u.transpose() * p.l();
    const Eigen::LLT<Eigen::MatrixXd> llt(m);
    const Eigen::MatrixXd lower = llt.matrixL();
    const Eigen::VectorXd mu = llt.solve(bvec);
    double log_det = 0.0;
    for (int i = 0; i < d - 1; ++i) log_det += 2.0 * std::log(lower(i, i));
    const double alpha = p.alpha();
    const double rate = alpha / std::sqrt(static_cast<double>(d));

    const long n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (long it = 0; it < n; ++it) {
        Eigen::VectorXd nv(d - 1);
        for (int i = 0; i < d - 1; ++i) nv[i] = rng.normal();
        const Eigen::VectorXd v =
            mu + lower.transpose().triangularView<Eigen::Upper>().solve(nv);
        const Eigen::VectorXd uv = u * v;
        const double t0 = std::sqrt(static_cast<double>(d)) * (-uv.maxCoeff());
        const double t = t0 - std::log(rng.uniform01()) / rate;
        const Eigen::VectorXd w =
            uv + Eigen::VectorXd::Constant(d, t / std::sqrt(static_cast<double>(d)));
        const Eigen::VectorXd z = w.array().exp().matrix();
        const Eigen::VectorXd dv = v - mu;
        const double log_g = -0.5 * (d - 1) * std::log(2.0 * M_PI) + 0.5 * log_det -
                             0.5 * dv.dot(m * dv) + std::log(rate) - rate * (t - t0) -
                             w.sum();
        const double ratio = std::exp(dens.logpdf(z) - log_g);
        sum += ratio;
        sum2 += ratio * ratio;
    }
    const double mean = sum / n;
    const double se = std::sqrt(std::max(0.0, sum2 / n - mean * mean) / n);
    CHECK(std::fabs(mean - 1.0) < 3.0 * se + 1e-5);
}

TEST_CASE("density integrand is homogeneous before truncation") {
    Rng rng(47);
    const HrParams p = oracle::random_hr_params(rng, 3, 1.3);
    const Threshold a(Eigen::VectorXd::Constant(3, 0.1));  // wide support
    const HrDensity dens(a, p);
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd z(3);
        for (int i = 0; i < 3; ++i) z[i] = 0.5 + 2.0 * rng.uniform01();
        const double v = 1.0 + 3.0 * rng.uniform01();
        const double lhs = dens.logpdf(v * z) - dens.logpdf(z);
        CHECK(lhs == doctest::Approx(-(3.0 + p.alpha()) * std::log(v)).epsilon(1e-10));
    }
}

TEST_CASE("sampler agrees with the density over rectangles") {
    const HrParams p = validate_hr(q2(1.2), vec2(-0.7, -0.5));
    const Threshold a = Threshold::ones(2);
    const HrDensity dens(a, p);
    const long n = 200000;
    const Eigen::MatrixXd s = sample(n, a, p, 1357);

    struct Rect {
        double x1, x2, y1, y2;
    };
    for (const Rect r : {Rect{1.1, 2.5, 0.3, 1.4}, Rect{0.2, 0.9, 1.05, 3.0},
                         Rect{1.5, 4.0, 1.5, 4.0}}) {
        auto inner = [&](double x) {
            return oracle::integrate(
                [&](double y) {
                    const double lp = dens.logpdf(vec2(x, y));
                    return std::isfinite(lp) ? std::exp(lp) : 0.0;
                },
                r.y1, r.y2, 1e-9);
        };
        const double prob = oracle::integrate(inner, r.x1, r.x2, 1e-8);
        long cnt = 0;
        for (long i = 0; i < n; ++i)
            if (s(i, 0) >= r.x1 && s(i, 0) <= r.x2 && s(i, 1) >= r.y1 && s(i, 1) <= r.y2)
                ++cnt;
        const double freq = static_cast<double>(cnt) / n;
        const double se = std::sqrt(std::max(prob * (1.0 - prob), 1.0 / n) / n);
        CHECK(std::fabs(freq - prob) < 3.0 * se);
    }
}

TEST_CASE("face_partition symmetry") {
    const FacePartition fp2 = face_partition(validate_hr(q2(1.3), vec2(-0.4, -0.4)));
    CHECK(fp2.probs[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fp2.probs.sum() == doctest::Approx(1.0).epsilon(1e-14));

    // exchangeable d = 3
    const int d = 3;
    const Eigen::MatrixXd q =
        2.0 * (Eigen::MatrixXd::Identity(d, d) - Eigen::MatrixXd::Constant(d, d, 1.0 / d));
    const HrParams p = validate_hr(q, Eigen::VectorXd::Constant(d, -1.0 / 3.0));
    const FacePartition fp3 = face_partition(p);
    for (int i = 0; i < d; ++i) CHECK(fp3.probs[i] == doctest::Approx(1.0 / 3).epsilon(1e-9));
}

TEST_CASE("face frequencies match simulation") {
    Rng rng(55);
    const HrParams p = oracle::random_hr_params(rng, 3, 1.0);
    const FacePartition fp = face_partition(standardize(p, Threshold::ones(3)));
    const long n = 20000;
    const Eigen::MatrixXd s = sample(n, Threshold::ones(3), p, 777);
    Eigen::VectorXd freq = Eigen::VectorXd::Zero(3);
    for (long i = 0; i < n; ++i) {
        int arg;
        // faces of the standardized point: argmax of z^alpha = argmax of z
        s.row(i).maxCoeff(&arg);
        freq[arg] += 1.0;
    }
    freq /= static_cast<double>(n);
    for (int i = 0; i < 3; ++i) {
        const double se = std::sqrt(fp.probs[i] * (1.0 - fp.probs[i]) / n);
        CHECK(std::fabs(freq[i] - fp.probs[i]) < 3.0 * se + 1e-4);
    }
}

TEST_CASE("sampler support, radius law, shard determinism") {
    Rng rng(66);
    const HrParams p = oracle::random_hr_params(rng, 3, 1.6);
    const Threshold a(Eigen::VectorXd::Ones(3));
    const long n = 20000;
    const Eigen::MatrixXd s = sample(n, a, p, 4242);
    CHECK(s.rows() == n);

    std::vector<double> u(n);
    for (long i = 0; i < n; ++i) {
        CHECK(s.row(i).maxCoeff() > 1.0);  // exceedance support
        // standardized radius max((z/a)^alpha) is 1-Pareto; 1/R is uniform
        u[i] = std::pow(s.row(i).maxCoeff(), -p.alpha());
    }
    std::sort(u.begin(), u.end());
    CHECK(ks_test_uniform(u) > 0.01);

    // sharding reproduces the sequential sample
    const Eigen::MatrixXd part = sample_rows(5000, 12000, a, p, 4242);
    CHECK((part - s.middleRows(5000, 7000)).cwiseAbs().maxCoeff() == 0.0);

    CHECK(sample(0, a, p, 1).rows() == 0);
}

TEST_CASE("face gaussian sampler against rejection oracle") {
    Rng rng(77);
    const HrParams p = oracle::random_hr_params(rng, 3, 1.0);
    const HrParams ps = standardize(p, Threshold::ones(3));
    const FacePartition fp = face_partition(ps);
    const int face = 1;

    const long n = 30000;
    Eigen::MatrixXd draws(n, 2);
    Rng sampler_rng(123);
    for (long i = 0; i < n; ++i) {
        const Eigen::VectorXd g = sample_face_gaussian(fp, face, sampler_rng);
        CHECK(g[face] == 0.0);
        int col = 0;
        for (int j = 0; j < 3; ++j)
            if (j != face) {
                CHECK(g[j] <= 0.0);
                draws(i, col++) = g[j];
            }
    }
    const Eigen::MatrixXd ref = oracle::truncated_gaussian_rejection(
        fp.gauss_mean[face], fp.gauss_cov[face], n, 999);
    Eigen::VectorXd mean_a, se_a, mean_b, se_b;
    oracle::row_moments(draws, mean_a, se_a);
    oracle::row_moments(ref, mean_b, se_b);
    for (int j = 0; j < 2; ++j) {
        const double se = std::sqrt(se_a[j] * se_a[j] + se_b[j] * se_b[j]);
        CHECK(std::fabs(mean_a[j] - mean_b[j]) < 3.0 * se + 1e-4);
    }
}

TEST_CASE("moments against simulation") {
    const HrParams p = validate_hr(q2(1.0), vec2(-0.6, -0.6));
    const Threshold a = Threshold::ones(2);
    const Moments mom = moments(a, p);
    CHECK(mom.mean_log[0] == doctest::Approx(mom.mean_log[1]).epsilon(1e-6));

    const long n = 200000;
    const Eigen::MatrixXd s = sample(n, a, p, 31337);
    const Eigen::MatrixXd w = s.array().log().matrix();
    Eigen::VectorXd mean, se;
    oracle::row_moments(w, mean, se);
    for (int j = 0; j < 2; ++j)
        CHECK(std::fabs(mom.mean_log[j] - mean[j]) < 3.0 * se[j] + 1e-4);

    // covariance entries
    for (int i = 0; i < 2; ++i)
        for (int j = i; j < 2; ++j) {
            double acc = 0.0, acc2 = 0.0;
            for (long r = 0; r < n; ++r) {
                const double v = (w(r, i) - mean[i]) * (w(r, j) - mean[j]);
                acc += v;
                acc2 += v * v;
            }
            const double cov = acc / n;
            const double cse = std::sqrt(std::max(0.0, acc2 / n - cov * cov) / n);
            CHECK(std::fabs(mom.cov_log(i, j) - cov) < 3.0 * cse + 1e-3);
        }

    // matrix part of the sufficient statistic
    Eigen::MatrixXd tsum = Eigen::MatrixXd::Zero(2, 2);
    Eigen::MatrixXd tsum2 = Eigen::MatrixXd::Zero(2, 2);
    for (long r = 0; r < n; ++r) {
        const Eigen::VectorXd wi = w.row(r);
        const Eigen::VectorXd c = wi.array() - wi.mean();
        const Eigen::MatrixXd t = -0.5 * c * c.transpose();
        tsum += t;
        tsum2 += t.cwiseProduct(t);
    }
    const Eigen::MatrixXd tmean = tsum / static_cast<double>(n);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const double var = tsum2(i, j) / n - tmean(i, j) * tmean(i, j);
            const double cse = std::sqrt(std::max(0.0, var) / n);
            CHECK(std::fabs(mom.stat_mat(i, j) - tmean(i, j)) < 3.0 * cse + 1e-3);
        }
}

TEST_CASE("fractional moments") {
    const HrParams p = validate_hr(q2(1.0), vec2(-0.5, -0.5));
    const Threshold a = Threshold::ones(2);
    CHECK(fractional_moment(a, p, vec2(0.0, 0.0)) == doctest::Approx(1.0).epsilon(1e-10));

    double prev = 1.0;
    for (double t : {0.1, 0.3, 0.5, 0.7}) {
        const double m = fractional_moment(a, p, vec2(t, 0.0));
        CHECK(m > prev);
        prev = m;
    }
    CHECK_THROWS_AS((void)fractional_moment(a, p, vec2(0.6, 0.5)), Error);

    const long n = 200000;
    const Eigen::MatrixXd s = sample(n, a, p, 2024);
    double acc = 0.0, acc2 = 0.0;
    for (long i = 0; i < n; ++i) {
        const double v = std::pow(s(i, 0), 0.3) * std::pow(s(i, 1), 0.2);
        acc += v;
        acc2 += v * v;
    }
    const double mc = acc / n;
    const double se = std::sqrt(std::max(0.0, acc2 / n - mc * mc) / n);
    const double cf = fractional_moment(a, p, vec2(0.3, 0.2));
    CHECK(std::fabs(cf - mc) < 3.0 * se);
}

TEST_CASE("from_spectral") {
    const HrParams p = from_spectral(Eigen::VectorXd::Zero(2),
                                     Eigen::MatrixXd::Identity(2, 2), 1.0);
    CHECK(p.q()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p.q()(0, 1) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(p.l()[0] == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(p.alpha() == doctest::Approx(1.0).epsilon(1e-12));

    Rng rng(19);
    for (int rep = 0; rep < 10; ++rep) {
        const int d = 2 + rep % 3;
        Eigen::MatrixXd b(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) b(i, j) = rng.normal();
        const Eigen::MatrixXd sigma =
            b * b.transpose() + Eigen::MatrixXd::Identity(d, d);
        Eigen::VectorXd m(d);
        for (int i = 0; i < d; ++i) m[i] = rng.normal();
        const double alpha = 0.5 + 2.0 * rng.uniform01();
        const HrParams pr = from_spectral(m, sigma, alpha);
        CHECK((pr.q() * Eigen::VectorXd::Ones(d)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(pr.alpha() == doctest::Approx(alpha).epsilon(1e-12));
    }
}
