#include <doctest.h>

#include <cmath>

#include "monoflow/flow_rule.hpp"
#include "monoflow/rng.hpp"

using namespace monoflow;

namespace {

Vec random_sym_block(Rng& rng, int d, double scale = 1.0) {
    Vec blk(d * d);
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            const double v = scale * rng.normal();
            blk[i * d + j] = v;
            blk[j * d + i] = v;
        }
    return blk;
}

Vec random_sym_vector(Rng& rng, const FlowRule& rule, double scale = 1.0) {
    const int b = rule.spatial_dim() * rule.spatial_dim();
    Vec v(rule.dim());
    for (int p = 0; p < rule.n_pts(); ++p)
        v.segment(p * b, b) = random_sym_block(rng, rule.spatial_dim(), scale);
    return v;
}

/// Independent projection oracle: minimize |x - tau|^2 subject to
/// |x^D| <= sigma0 via bisection on the KKT multiplier nu, where
/// x(nu) = tau - nu/(1+nu) tau^D.
Vec qp_projection_oracle(const Vec& tau, int d, double sigma0) {
    const Vec dev = deviator(tau, d);
    const double r = dev.norm();
    if (r <= sigma0) return tau;
    double lo = 0.0, hi = 1.0;
    auto radius = [&](double nu) { return r / (1.0 + nu); };
    while (radius(hi) > sigma0) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (radius(mid) > sigma0)
            lo = mid;
        else
            hi = mid;
    }
    const double nu = 0.5 * (lo + hi);
    return tau - (nu / (1.0 + nu)) * dev;
}

} // namespace

TEST_CASE("deviator is traceless and kills multiples of the identity") {
    for (int d : {2, 3}) {
        Vec id(d * d);
        id.setZero();
        for (int i = 0; i < d; ++i) id[i * d + i] = 2.5;
        CHECK(deviator(id, d).norm() == 0.0);

        // Trace divisible by d: the subtraction is exact.
        Vec blk = Vec::Zero(d * d);
        for (int i = 0; i < d; ++i) blk[i * d + i] = static_cast<double>(d - i);
        blk[1] = blk[d] = 0.5;
        Vec dev = deviator(blk, d);
        if (d == 2) CHECK(block_trace(dev, d) == 0.0);

        Rng rng(99 + d);
        for (int trial = 0; trial < 50; ++trial) {
            Vec t = random_sym_block(rng, d);
            CHECK(std::abs(block_trace(deviator(t, d), d)) <= 4e-16 * t.norm());
        }
    }
}

TEST_CASE("resolvent fixes feasible von Mises blocks") {
    FlowRule rule = FlowRule::von_mises(1.0, 3, 1);
    Vec tau = Vec::Zero(9);
    tau[0] = 1.0;
    tau[4] = 1.0;
    tau[8] = 1.0; // pure trace, |tau^D| = 0
    tau[1] = tau[3] = 0.25;
    CHECK(deviator(tau, 3).norm() == doctest::Approx(0.5 * std::sqrt(2.0)));
    const Vec proj = resolvent(rule, tau, 0.7);
    CHECK((proj - tau).norm() == 0.0);
}

TEST_CASE("resolvent agrees with the QP projection oracle") {
    FlowRule rule = FlowRule::von_mises(1.0, 3, 1);
    // Purely deviatoric block with |tau^D| = 2.
    Vec tau = Vec::Zero(9);
    tau[0] = std::sqrt(2.0);
    tau[4] = -std::sqrt(2.0);
    CHECK(deviator(tau, 3).norm() == doctest::Approx(2.0));
    const Vec proj = resolvent(rule, tau, 1.3);
    CHECK(proj.norm() == doctest::Approx(1.0));
    CHECK(proj.normalized().dot(tau.normalized()) == doctest::Approx(1.0));
    const Vec oracle = qp_projection_oracle(tau, 3, 1.0);
    CHECK((proj - oracle).norm() <= 1e-10);

    Rng rng(31);
    for (int trial = 0; trial < 25; ++trial) {
        const Vec t = random_sym_block(rng, 3, 1.5);
        const Vec p = resolvent(rule, t, 0.4);
        CHECK((p - qp_projection_oracle(t, 3, 1.0)).norm() <= 1e-9);
    }
}

TEST_CASE("resolvent of the linear rule") {
    FlowRule rule = FlowRule::linear(1.0);
    Vec h(1);
    h << 2.0;
    CHECK(resolvent(rule, h, 1.0)[0] == doctest::Approx(1.0));
}

TEST_CASE("yosida map examples") {
    FlowRule vm = FlowRule::von_mises(1.0, 3, 1);

    Vec inside = Vec::Zero(9);
    inside[1] = inside[3] = 0.3; // |tau^D| < 1
    CHECK(yosida(vm, inside, 0.2).norm() == 0.0);

    Vec tau = Vec::Zero(9);
    tau[0] = std::sqrt(2.0);
    tau[4] = -std::sqrt(2.0); // purely deviatoric, |tau| = 2
    const Vec y = yosida(vm, tau, 0.5);
    CHECK((y - tau).norm() <= 1e-12);
    // Cross-check against (h - projection)/lambda.
    const Vec alt = (tau - qp_projection_oracle(tau, 3, 1.0)) / 0.5;
    CHECK((y - alt).norm() <= 1e-10);

    FlowRule lin = FlowRule::linear(1.0);
    Vec h(1);
    h << 2.0;
    CHECK(yosida(lin, h, 1.0)[0] == doctest::Approx(1.0));
}

TEST_CASE("minimal section") {
    FlowRule vm = FlowRule::von_mises(1.0, 3, 2);
    Rng rng(5);
    Vec tau = random_sym_vector(rng, vm, 0.2);
    CHECK(minimal_section(vm, tau).norm() == 0.0);

    Vec outside = Vec::Zero(18);
    outside[0] = 5.0;
    outside[4] = -5.0;
    CHECK_THROWS_AS(minimal_section(vm, outside), OutsideDomain);
    try {
        minimal_section(vm, outside);
    } catch (const OutsideDomain& e) {
        CHECK(e.distance() == doctest::Approx(std::sqrt(50.0) - 1.0));
    }

    FlowRule box = FlowRule::box(Vec::Constant(1, -1.0), Vec::Constant(1, 1.0));
    CHECK(minimal_section(box, Vec::Constant(1, 0.3)).norm() == 0.0);

    FlowRule lin = FlowRule::linear(2.0);
    CHECK(minimal_section(lin, Vec::Ones(1))[0] == doctest::Approx(2.0));
}

TEST_CASE("smoothed max examples and derivatives") {
    const double eps = 0.1;
    CHECK(smoothed_max(0.2, eps) == doctest::Approx(0.2));
    CHECK(smoothed_max(0.0, eps) == doctest::Approx(0.01875)); // 3 eps / 16
    CHECK(smoothed_max(-0.1, eps) == 0.0);
    CHECK(smoothed_max_d1(-0.1, eps) == 0.0);
    CHECK(smoothed_max_d2(-0.1, eps) == 0.0);

    // C^2 junctions at +-eps.
    CHECK(smoothed_max(eps, eps) == doctest::Approx(eps));
    CHECK(smoothed_max_d1(eps - 1e-13, eps) == doctest::Approx(1.0));
    CHECK(smoothed_max_d2(eps - 1e-9, eps) == doctest::Approx(0.0).epsilon(1e-5));

    // Derivatives match central differences inside the blend.
    for (double r : {-0.05, 0.0, 0.03, 0.09}) {
        const double t = 1e-6;
        const double fd1 = (smoothed_max(r + t, eps) - smoothed_max(r - t, eps)) / (2 * t);
        CHECK(smoothed_max_d1(r, eps) == doctest::Approx(fd1).epsilon(1e-6));
        const double fd2 =
            (smoothed_max(r + t, eps) - 2 * smoothed_max(r, eps) + smoothed_max(r - t, eps)) /
            (t * t);
        CHECK(smoothed_max_d2(r, eps) == doctest::Approx(fd2).epsilon(1e-4));
    }
}

TEST_CASE("smoothed max uniform bound on a grid") {
    for (double eps : {0.5, 0.1, 0.01}) {
        double sup = 0.0;
        for (int i = 0; i <= 100000; ++i) {
            const double r = -2.0 + 4.0 * i / 100000.0;
            sup = std::max(sup, std::abs(smoothed_max(r, eps) - std::max(0.0, r)));
        }
        CHECK(sup <= 3.0 / 16.0 * eps + 1e-14);
    }
}

TEST_CASE("smoothed_eval examples") {
    FlowRule vm = FlowRule::von_mises(1.0, 3, 1);
    RegParams p(0.5, 0.1);

    CHECK(smoothed_eval(vm, Vec::Zero(9), p).norm() == 0.0);

    // |tau^D| = 4 sigma0: argument 0.75 >= eps, identical to the Yosida map.
    Vec tau = Vec::Zero(9);
    tau[0] = 2.0 * std::sqrt(2.0);
    tau[4] = -2.0 * std::sqrt(2.0);
    CHECK(deviator(tau, 3).norm() == doctest::Approx(4.0));
    CHECK((smoothed_eval(vm, tau, p) - yosida(vm, tau, p.lambda)).norm() == 0.0);

    // At the yield surface the gap stays within (3/16)(eps/lambda)|tau^D|.
    Vec edge = Vec::Zero(9);
    edge[0] = std::sqrt(0.5);
    edge[4] = -std::sqrt(0.5); // |tau^D| = 1 = sigma0
    const double gap = (smoothed_eval(vm, edge, p) - yosida(vm, edge, p.lambda)).norm();
    CHECK(gap <= 3.0 / 16.0 * p.epsilon / p.lambda * 1.0 + 1e-14);

    // Numerical sweep across the smoothing band.
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec t = random_sym_block(rng, 3, 0.8);
        const double dev_norm = deviator(t, 3).norm();
        const double bound = 3.0 / 16.0 * p.epsilon / p.lambda * std::max(dev_norm, 1e-30);
        CHECK((smoothed_eval(vm, t, p) - yosida(vm, t, p.lambda)).norm() <= bound + 1e-14);
    }
}

TEST_CASE("smoothed_jvp vanishes deep inside the feasible set") {
    FlowRule vm = FlowRule::von_mises(1.0, 3, 2);
    RegParams p(0.5, 0.1);
    Rng rng(3);
    const Vec tau = random_sym_vector(rng, vm, 0.05); // |tau^D| far below sigma0/(1+eps)
    const Vec h = random_sym_vector(rng, vm);
    CHECK(smoothed_jvp(vm, tau, h, p).norm() == 0.0);
}

TEST_CASE("smoothed_jvp matches central differences at second order") {
    FlowRule vm = FlowRule::von_mises(1.0, 3, 2);
    RegParams p(0.5, 0.25);
    Rng rng(41);
    for (int trial = 0; trial < 5; ++trial) {
        const Vec tau = random_sym_vector(rng, vm, 1.2);
        const Vec h = random_sym_vector(rng, vm);
        const Vec jvp = smoothed_jvp(vm, tau, h, p);
        auto fd_error = [&](double t) {
            const Vec plus = smoothed_eval(vm, Vec(tau + t * h), p);
            const Vec minus = smoothed_eval(vm, Vec(tau - t * h), p);
            return ((plus - minus) / (2.0 * t) - jvp).norm();
        };
        const double e3 = fd_error(1e-3);
        const double e4 = fd_error(1e-4);
        CHECK(e3 <= 1e-2);
        if (e4 > 1e-11) {
            const double slope = std::log(e3 / e4) / std::log(10.0);
            CHECK(slope >= 1.5);
        }
    }
}

TEST_CASE("smoothed_jvp is self-adjoint") {
    FlowRule vm = FlowRule::von_mises(1.0, 3, 2);
    RegParams p(0.5, 0.2);
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec tau = random_sym_vector(rng, vm, 1.1);
        const Vec h1 = random_sym_vector(rng, vm);
        const Vec h2 = random_sym_vector(rng, vm);
        const double lhs = smoothed_jvp(vm, tau, h1, p).dot(h2);
        const double rhs = h1.dot(smoothed_jvp(vm, tau, h2, p));
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("smoothed_jacobian is consistent with smoothed_jvp") {
    FlowRule vm = FlowRule::von_mises(0.8, 2, 3);
    RegParams p(0.3, 0.2);
    Rng rng(14);
    const Vec tau = random_sym_vector(rng, vm, 1.0);
    const Mat J = smoothed_jacobian(vm, tau, p);
    for (int trial = 0; trial < 10; ++trial) {
        const Vec h = random_sym_vector(rng, vm);
        CHECK((J * h - smoothed_jvp(vm, tau, h, p)).norm() <= 1e-13 * h.norm());
    }
}

TEST_CASE("smoothed_hvp vanishes deep inside and is symmetric") {
    FlowRule vm = FlowRule::von_mises(1.0, 3, 2);
    RegParams p(0.5, 0.1);
    Rng rng(9);
    const Vec inside = random_sym_vector(rng, vm, 0.05);
    const Vec h1 = random_sym_vector(rng, vm);
    const Vec h2 = random_sym_vector(rng, vm);
    CHECK(smoothed_hvp(vm, inside, h1, h2, p).norm() == 0.0);

    for (int trial = 0; trial < 20; ++trial) {
        const Vec tau = random_sym_vector(rng, vm, 1.2);
        const Vec a = random_sym_vector(rng, vm);
        const Vec b = random_sym_vector(rng, vm);
        const Vec ab = smoothed_hvp(vm, tau, a, b, p);
        const Vec ba = smoothed_hvp(vm, tau, b, a, p);
        CHECK((ab - ba).norm() == 0.0);
    }
}

TEST_CASE("smoothed_hvp matches central differences of the jvp") {
    FlowRule vm = FlowRule::von_mises(1.0, 3, 2);
    RegParams p(0.5, 0.25);
    Rng rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        const Vec tau = random_sym_vector(rng, vm, 1.2);
        const Vec h1 = random_sym_vector(rng, vm);
        const Vec h2 = random_sym_vector(rng, vm);
        const Vec hvp = smoothed_hvp(vm, tau, h1, h2, p);
        auto fd_error = [&](double t) {
            const Vec plus = smoothed_jvp(vm, Vec(tau + t * h2), h1, p);
            const Vec minus = smoothed_jvp(vm, Vec(tau - t * h2), h1, p);
            return ((plus - minus) / (2.0 * t) - hvp).norm();
        };
        const double e3 = fd_error(1e-3);
        const double e4 = fd_error(1e-4);
        CHECK(e3 <= 5e-2);
        if (e4 > 1e-10) {
            const double slope = std::log(e3 / e4) / std::log(10.0);
            CHECK(slope >= 1.5);
        }
    }
}

TEST_CASE("Yosida maps are monotone and Lipschitz") {
    Rng rng(77);
    FlowRule vm = FlowRule::von_mises(1.0, 3, 2);
    FlowRule box = FlowRule::box(Vec::Constant(4, -0.5), Vec::Constant(4, 1.0));
    FlowRule lin = FlowRule::linear(2.0);
    const double lambda = 0.3;

    for (int trial = 0; trial < 1000; ++trial) {
        const Vec a = random_sym_vector(rng, vm, 1.5);
        const Vec b = random_sym_vector(rng, vm, 1.5);
        const Vec ya = yosida(vm, a, lambda), yb = yosida(vm, b, lambda);
        CHECK((ya - yb).dot(a - b) >= -1e-12);
        CHECK((ya - yb).norm() <= (1.0 / lambda) * (a - b).norm() * (1.0 + 1e-12));
    }
    for (int trial = 0; trial < 1000; ++trial) {
        const Vec a = rng.normal_vector(4), b = rng.normal_vector(4);
        const Vec ya = yosida(box, a, lambda), yb = yosida(box, b, lambda);
        CHECK((ya - yb).dot(a - b) >= -1e-12);
        CHECK((ya - yb).norm() <= (1.0 / lambda) * (a - b).norm() * (1.0 + 1e-12));
    }
    for (int trial = 0; trial < 1000; ++trial) {
        const Vec a = rng.normal_vector(3), b = rng.normal_vector(3);
        const Vec ya = yosida(lin, a, lambda), yb = yosida(lin, b, lambda);
        CHECK((ya - yb).dot(a - b) >= -1e-12);
        CHECK((ya - yb).norm() <= (1.0 / lambda) * (a - b).norm() * (1.0 + 1e-12));
    }
}

TEST_CASE("resolvent composition (A_lambda)_mu = A_{lambda+mu}") {
    const double lambda = 0.4, mu = 0.2;

    // Linear rule: closed forms on both sides.
    FlowRule lin = FlowRule::linear(1.7);
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec h = rng.normal_vector(3);
        // Resolvent of A_lambda at parameter mu by contraction iteration.
        Vec x = h;
        for (int it = 0; it < 400; ++it) x = h - mu * yosida(lin, x, lambda);
        const Vec lhs = (h - x) / mu;
        const Vec rhs = yosida(lin, h, lambda + mu);
        CHECK((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }

    FlowRule vm = FlowRule::von_mises(1.0, 3, 2);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec h = random_sym_vector(rng, vm, 1.3);
        Vec x = h;
        for (int it = 0; it < 400; ++it) x = h - mu * yosida(vm, x, lambda);
        const Vec lhs = (h - x) / mu;
        const Vec rhs = yosida(vm, h, lambda + mu);
        CHECK((lhs - rhs).norm() <= 1e-10 * (1.0 + rhs.norm()));
    }
}

TEST_CASE("resolvent inequality") {
    Rng rng(15);
    FlowRule lin = FlowRule::linear(2.5);
    FlowRule vm = FlowRule::von_mises(1.0, 3, 2);
    for (int trial = 0; trial < 1000; ++trial) {
        const double lambda = rng.uniform(0.05, 1.0);
        const double mu = rng.uniform(0.0, 1.0) * (2.0 * lambda) * 0.999 + 1e-6;
        if (!(2.0 * lambda > mu)) continue;

        const Vec h = rng.normal_vector(5);
        const double lhs = (resolvent(lin, h, lambda) - resolvent(lin, h, lambda + mu)).norm();
        const double rhs = std::sqrt(mu / (2.0 * lambda - mu)) *
                           (h - resolvent(lin, h, lambda)).norm();
        CHECK(lhs <= rhs * (1.0 + 1e-12) + 1e-15);

        const Vec tau = random_sym_vector(rng, vm, 1.4);
        const double lhs_vm =
            (resolvent(vm, tau, lambda) - resolvent(vm, tau, lambda + mu)).norm();
        CHECK(lhs_vm == 0.0); // projection does not depend on lambda
    }
}

TEST_CASE("smoothed operator converges uniformly to the Yosida map") {
    // Frozen constant: the gap is supported on the smoothing band, where
    // |tau^D| <= sigma0/(1-eps) <= 2 sigma0, so per block the gap is at most
    // (3/16)(eps/lambda) 2 sigma0; with two blocks the constant 0.54 covers it.
    const double frozen_c = 0.54;
    FlowRule vm = FlowRule::von_mises(1.0, 3, 2);
    Rng rng(62);
    for (double lambda : {0.5, 0.1}) {
        for (double eps : {0.4, 0.1, 0.01}) {
            RegParams p(lambda, eps);
            double sup = 0.0;
            for (int trial = 0; trial < 1000; ++trial) {
                const Vec tau = random_sym_vector(rng, vm, 1.0);
                sup = std::max(sup,
                               (smoothed_eval(vm, tau, p) - yosida(vm, tau, lambda)).norm());
            }
            CHECK(sup <= frozen_c * eps / lambda);
        }
    }
}

TEST_CASE("RegParams validation") {
    CHECK_THROWS_AS(RegParams(0.0, 0.1), Error);
    CHECK_THROWS_AS(RegParams(0.5, 0.0), Error);
    CHECK_THROWS_AS(RegParams(0.5, 0.6), Error);
    RegParams ok(0.5, 0.5);
    CHECK(ok.lambda == 0.5);
}

TEST_CASE("von Mises operations reject asymmetric blocks") {
    FlowRule vm = FlowRule::von_mises(1.0, 2, 1);
    Vec bad(4);
    bad << 0.0, 1.0, -1.0, 0.0;
    CHECK_THROWS_AS(resolvent(vm, bad, 0.5), Error);
}
