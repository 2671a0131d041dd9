#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hrp/core.hpp"
#include "hrp/error.hpp"
#include "hrp/inference.hpp"
#include "hrp/pareto.hpp"
#include "hrp/rng.hpp"
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

}  // namespace

TEST_CASE("validate_hr accepts the 2-d model") {
    const HrParams p = validate_hr(q2(1.0), vec2(-0.5, -0.5));
    CHECK(p.alpha() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.dim() == 2);
    CHECK((p.q() * Eigen::VectorXd::Ones(2)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("validate_hr rejections") {
    CHECK_THROWS_WITH_AS((void)validate_hr(Eigen::MatrixXd::Identity(2, 2), vec2(-1, -1)),
                         doctest::Contains("annihilate"), Error);
    CHECK_THROWS_AS((void)validate_hr(q2(1.0), vec2(1.0, -0.5)), Error);
    try {
        (void)validate_hr(q2(1.0), vec2(1.0, -0.5));
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ExponentNonPositive);
    }
    // asymmetric
    Eigen::MatrixXd bad = q2(1.0);
    bad(0, 1) += 1e-3;
    try {
        (void)validate_hr(bad, vec2(-0.5, -0.5));
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotSymmetric);
    }
    // negative on the complement
    try {
        (void)validate_hr(-q2(1.0), vec2(-0.5, -0.5));
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonPositiveOnComplement);
    }
    // rank deficient: d=3 matrix with two zero eigenvalues
    const Eigen::MatrixXd u = complement_basis(3);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
    m(0, 0) = 1.0;
    try {
        (void)validate_hr(u * m * u.transpose(), Eigen::VectorXd::Constant(3, -0.5));
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::KernelViolation);
    }
    // d = 1 rejected
    CHECK_THROWS_AS((void)validate_hr(Eigen::MatrixXd::Zero(1, 1),
                                      -Eigen::VectorXd::Ones(1)),
                    Error);
}

TEST_CASE("valid parameters have the right spectrum") {
    Rng rng(11);
    for (int d : {2, 3, 5}) {
        const HrParams p = oracle::random_hr_params(rng, d, 1.4);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.q());
        // one zero eigenvalue, the rest strictly positive
        CHECK(std::fabs(es.eigenvalues()[0]) < 1e-10);
        CHECK(es.eigenvalues()[1] > 1e-8);
        // kernel vector proportional to ones
        const Eigen::VectorXd v = es.eigenvectors().col(0);
        CHECK(std::fabs(std::fabs(v.sum()) - std::sqrt(static_cast<double>(d))) < 1e-8);
    }
}

TEST_CASE("sufficient_stat") {
    const double e = std::exp(1.0);
    const SufficientStat t1 = sufficient_stat(vec2(e, e));
    CHECK(t1.mat.cwiseAbs().maxCoeff() < 1e-15);
    CHECK(t1.vec[0] == doctest::Approx(1.0));
    CHECK(t1.vec[1] == doctest::Approx(1.0));

    const SufficientStat t2 = sufficient_stat(vec2(e, 1.0 / e));
    CHECK(t2.mat(0, 0) == doctest::Approx(-0.5));
    CHECK(t2.mat(0, 1) == doctest::Approx(0.5));
    CHECK(t2.vec[0] == doctest::Approx(1.0));
    CHECK(t2.vec[1] == doctest::Approx(-1.0));

    // brute-force loop oracle, d = 4
    Rng rng(3);
    Eigen::VectorXd z(4);
    for (int i = 0; i < 4; ++i) z[i] = std::exp(rng.normal());
    const SufficientStat t = sufficient_stat(z);
    double mean = 0.0;
    for (int i = 0; i < 4; ++i) mean += std::log(z[i]);
    mean /= 4.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const double expect =
                -0.5 * (std::log(z[i]) - mean) * (std::log(z[j]) - mean);
            CHECK(t.mat(i, j) == doctest::Approx(expect).epsilon(1e-12));
        }
    CHECK((t.mat * Eigen::VectorXd::Ones(4)).cwiseAbs().maxCoeff() < 1e-14);

    CHECK_THROWS_AS((void)sufficient_stat(vec2(1.0, -2.0)), Error);
}

TEST_CASE("sufficient_stat lands in the moment set") {
    // -1/2 (v - vbar)(v - vbar)' - mat must be PSD on the complement; for a
    // single observation the two coincide.
    Rng rng(9);
    for (int rep = 0; rep < 50; ++rep) {
        Eigen::VectorXd z(3);
        for (int i = 0; i < 3; ++i) z[i] = std::exp(2.0 * rng.normal());
        const SufficientStat t = sufficient_stat(z);
        const Eigen::VectorXd c = t.vec.array() - t.vec.mean();
        const Eigen::MatrixXd diff = -0.5 * c * c.transpose() - t.mat;
        CHECK(diff.cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("scale_transform") {
    const HrParams p = validate_hr(q2(1.0), vec2(-0.5, -0.5));
    const Threshold a(vec2(1.0, 2.0));

    auto id = scale_transform(p, a, vec2(1.0, 1.0));
    CHECK((id.first.l() - p.l()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((id.second.a - a.a).cwiseAbs().maxCoeff() < 1e-14);

    const double e = std::exp(1.0);
    auto tr = scale_transform(p, a, vec2(e, 1.0));
    CHECK(tr.first.l()[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(tr.first.l()[1] == doctest::Approx(-1.5).epsilon(1e-12));
    CHECK(tr.second.a[0] == doctest::Approx(e * 1.0));
    CHECK(tr.second.a[1] == doctest::Approx(2.0));
    CHECK(tr.first.alpha() == doctest::Approx(p.alpha()).epsilon(1e-13));

    // group inverse
    Rng rng(4);
    for (int rep = 0; rep < 20; ++rep) {
        const HrParams pr = oracle::random_hr_params(rng, 3, 0.8);
        Eigen::VectorXd u(3);
        for (int i = 0; i < 3; ++i) u[i] = std::exp(rng.normal());
        const Threshold a3(Eigen::VectorXd::Ones(3));
        auto fwd = scale_transform(pr, a3, u);
        auto back = scale_transform(fwd.first, fwd.second, u.cwiseInverse());
        CHECK((back.first.l() - pr.l()).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((back.second.a - a3.a).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("power_transform") {
    const HrParams p = validate_hr(q2(1.0), vec2(-1.0, -1.0));  // alpha = 2
    const Threshold a(vec2(1.0, 3.0));

    auto id = power_transform(p, a, 1.0);
    CHECK((id.first.q() - p.q()).cwiseAbs().maxCoeff() < 1e-14);

    auto halved = power_transform(p, a, 2.0);
    CHECK(halved.first.alpha() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(halved.second.a[1] == doctest::Approx(9.0));

    auto comp = power_transform(power_transform(p, a, 0.5).first,
                                power_transform(p, a, 0.5).second, 2.0);
    CHECK((comp.first.q() - p.q()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((comp.first.l() - p.l()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((comp.second.a - a.a).cwiseAbs().maxCoeff() < 1e-12);

    CHECK_THROWS_AS((void)power_transform(p, a, 0.0), Error);
}

TEST_CASE("standardize") {
    const HrParams p = validate_hr(q2(1.0), vec2(-0.5, -0.5));
    // threshold 1, exponent already 1: identity
    const HrParams s1 = standardize(p, Threshold::ones(2));
    CHECK((s1.q() - p.q()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((s1.l() - p.l()).cwiseAbs().maxCoeff() < 1e-14);

    // constant threshold is annihilated for alpha = 1
    const HrParams s2 = standardize(p, Threshold(vec2(2.0, 2.0)));
    CHECK((s2.l() - p.l()).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(s2.alpha() == doctest::Approx(1.0).epsilon(1e-13));

    // change-of-variables oracle: density of a Zs^{1/alpha} at z equals the
    // original density pointwise
    Rng rng(21);
    const HrParams pr = oracle::random_hr_params(rng, 3, 1.7);
    Eigen::VectorXd av(3);
    av << 0.5, 1.5, 2.0;
    const Threshold a(av);
    const HrParams ps = standardize(pr, a);
    CHECK(ps.alpha() == doctest::Approx(1.0).epsilon(1e-12));
    const HrDensity orig(a, pr);
    const HrDensity stnd(Threshold::ones(3), ps);
    for (int rep = 0; rep < 10; ++rep) {
        Eigen::VectorXd z(3);
        for (int i = 0; i < 3; ++i) z[i] = av[i] * std::exp(0.5 + 0.3 * rng.normal());
        // zs = (z/a)^alpha; log f(z) = log fs(zs) + sum log(dzs/dz)
        Eigen::VectorXd zs(3);
        double log_jac = 0.0;
        for (int i = 0; i < 3; ++i) {
            zs[i] = std::pow(z[i] / av[i], pr.alpha());
            log_jac += std::log(pr.alpha() * std::pow(z[i] / av[i], pr.alpha() - 1.0) /
                                av[i]);
        }
        const double lhs = orig.logpdf(z);
        const double rhs = stnd.logpdf(zs) + log_jac;
        if (std::isfinite(lhs) || std::isfinite(rhs)) {
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
        }
    }
}

TEST_CASE("generalized transforms") {
    Rng rng(8);
    const int d = 3;
    const HrParams base = oracle::random_hr_params(rng, d, 1.0);
    Eigen::VectorXd alpha(3);
    alpha << 0.7, 1.3, 2.1;
    const GenHrParams g = validate_gen(alpha, base.q(), base.l());
    CHECK(std::fabs(g.l().sum() + 1.0) < 1e-14);
    const Threshold a(Eigen::VectorXd::Ones(d));

    auto id = gen_transforms(g, a, Eigen::VectorXd::Ones(d), Eigen::VectorXd::Ones(d));
    CHECK((id.first.l() - g.l()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((id.first.alpha() - g.alpha()).cwiseAbs().maxCoeff() < 1e-12);

    // constant alpha reduces to the standard model with (abar^2 Q, abar l)
    const double abar = 1.6;
    const GenHrParams gc =
        validate_gen(Eigen::VectorXd::Constant(d, abar), base.q(), base.l());
    const HrParams equiv = validate_hr(abar * abar * base.q(), abar * base.l());
    const HrDensity std_dens(a, equiv);
    for (int rep = 0; rep < 5; ++rep) {
        Eigen::VectorXd z(d);
        for (int i = 0; i < d; ++i) z[i] = std::exp(0.4 + 0.5 * rng.normal());
        const double lhs = loglik_gen(z.transpose(), a, gc);
        const double rhs = std_dens.logpdf(z);
        if (std::isfinite(lhs) || std::isfinite(rhs))
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }

    // density invariance under a scale/power transform pair
    Eigen::VectorXd u(d), beta(d);
    for (int i = 0; i < d; ++i) {
        u[i] = std::exp(0.3 * rng.normal());
        beta[i] = std::exp(0.3 * rng.normal());
    }
    auto moved = gen_transforms(g, a, u, beta);
    for (int rep = 0; rep < 5; ++rep) {
        Eigen::VectorXd z(d);
        for (int i = 0; i < d; ++i) z[i] = std::exp(0.4 + 0.5 * rng.normal());
        // transformed point and jacobian of z -> (u z)^beta
        Eigen::VectorXd zt(d);
        double log_jac = 0.0;
        for (int i = 0; i < d; ++i) {
            zt[i] = std::pow(u[i] * z[i], beta[i]);
            log_jac += std::log(beta[i]) + beta[i] * std::log(u[i]) +
                       (beta[i] - 1.0) * std::log(z[i]);
        }
        const double lhs = loglik_gen(z.transpose(), a, g);
        const double rhs = loglik_gen(zt.transpose(), moved.second, moved.first) + log_jac;
        if (std::isfinite(lhs) || std::isfinite(rhs))
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
    }

    // reduction: back transform of a standard draw has the generalized law
    const GenReduction red = gen_reduce(g, a);
    CHECK(red.std_params.alpha() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((red.back_power - g.alpha().cwiseInverse()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("center_project") {
    const int d = 4;
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Constant(d, d, 1.0);
    CHECK(center_project(ones).cwiseAbs().maxCoeff() < 1e-14);

    const Eigen::MatrixXd pi = center_project(Eigen::MatrixXd::Identity(d, d));
    CHECK(pi(0, 0) == doctest::Approx(1.0 - 1.0 / d));
    CHECK(pi(0, 1) == doctest::Approx(-1.0 / d));

    Rng rng(17);
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::MatrixXd m(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
        m = 0.5 * (m + m.transpose()).eval();
        const Eigen::MatrixXd pm = center_project(m);
        CHECK((pm * Eigen::VectorXd::Ones(d)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((center_project(pm) - pm).cwiseAbs().maxCoeff() < 1e-12);
        // self-adjoint under Frobenius: <P(A),B> = <A,P(B)>
        Eigen::MatrixXd b(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) b(i, j) = rng.normal();
        b = 0.5 * (b + b.transpose()).eval();
        const double lhs = center_project(m).cwiseProduct(b).sum();
        const double rhs = m.cwiseProduct(center_project(b)).sum();
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
    Eigen::MatrixXd asym(2, 2);
    asym << 0.0, 1.0, 0.0, 0.0;
    CHECK_THROWS_AS((void)center_project(asym), Error);
}

TEST_CASE("ParamVector round trip and inner product") {
    Rng rng(6);
    for (int d : {2, 3, 5}) {
        const ParamVector pv(d);
        CHECK(pv.size() == d * (d + 1) / 2);
        const Eigen::MatrixXd u = complement_basis(d);
        // orthonormal matrix basis
        for (int k = 0; k < pv.mat_size(); ++k) {
            const Eigen::MatrixXd bk = pv.mat_basis(k);
            CHECK((bk * Eigen::VectorXd::Ones(d)).cwiseAbs().maxCoeff() < 1e-13);
            for (int l = 0; l <= k; ++l) {
                const double ip = bk.cwiseProduct(pv.mat_basis(l)).sum();
                CHECK(ip == doctest::Approx(k == l ? 1.0 : 0.0).epsilon(1e-12));
            }
        }
        for (int rep = 0; rep < 10; ++rep) {
            Eigen::MatrixXd m(d - 1, d - 1);
            for (int i = 0; i < d - 1; ++i)
                for (int j = 0; j < d - 1; ++j) m(i, j) = rng.normal();
            m = 0.5 * (m + m.transpose()).eval();
            const Eigen::MatrixXd a1 = u * m * u.transpose();
            Eigen::VectorXd b1(d), b2(d);
            for (int i = 0; i < d; ++i) {
                b1[i] = rng.normal();
                b2[i] = rng.normal();
            }
            const Eigen::VectorXd coords = pv.embed(a1, b1);
            auto [a_back, b_back] = pv.extract(coords);
            CHECK((a_back - a1).cwiseAbs().maxCoeff() < 1e-12);
            CHECK((b_back - b1).cwiseAbs().maxCoeff() < 1e-14);

            Eigen::MatrixXd m2(d - 1, d - 1);
            for (int i = 0; i < d - 1; ++i)
                for (int j = 0; j < d - 1; ++j) m2(i, j) = rng.normal();
            m2 = 0.5 * (m2 + m2.transpose()).eval();
            const Eigen::MatrixXd a2 = u * m2 * u.transpose();
            const double ip_flat = coords.dot(pv.embed(a2, b2));
            const double ip_e = param_inner(a1, b1, a2, b2);
            CHECK(ip_flat == doctest::Approx(ip_e).epsilon(1e-11));
        }
    }
}

TEST_CASE("threshold validation") {
    CHECK_THROWS_AS((void)Threshold(vec2(1.0, 0.0)), Error);
    CHECK_THROWS_AS((void)Threshold(vec2(-1.0, 1.0)), Error);
}

TEST_CASE("gen validation snaps the identifiability constraint") {
    const Eigen::MatrixXd q = q2(2.0);
    Eigen::VectorXd l = vec2(-0.4, -0.6 + 3e-11);
    Eigen::VectorXd alpha = vec2(1.0, 2.0);
    const GenHrParams g = validate_gen(alpha, q, l);
    CHECK(g.l().sum() == doctest::Approx(-1.0).epsilon(1e-15));
    // far off the constraint is rejected
    CHECK_THROWS_AS((void)validate_gen(alpha, q, vec2(-0.4, -0.4)), Error);
    CHECK_THROWS_AS((void)validate_gen(vec2(1.0, -2.0), q, vec2(-0.4, -0.6)), Error);
}
