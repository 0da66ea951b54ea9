#include <doctest.h>

#include <cmath>

#include "monoflow/sensitivity.hpp"
#include "monoflow/rng.hpp"
#include "toy_setup.hpp"

using namespace monoflow;
using namespace monoflow::testing;

namespace {

Trajectory random_direction(Rng& rng, const TimeGrid& grid, Index dim, bool zero_at_origin = true) {
    Trajectory h(grid, dim);
    for (Index k = zero_at_origin ? 1 : 0; k <= grid.N; ++k) h[k] = rng.normal_vector(dim);
    return h;
}

Trajectory shifted(const Trajectory& base, double t, const Trajectory& dir) {
    Trajectory out = base;
    for (Index k = 0; k < out.nodes(); ++k) out[k] += t * dir[k];
    return out;
}

double discrete_l2_pairing(const Trajectory& a, const Trajectory& b, double tau) {
    double acc = 0.0;
    for (Index k = 1; k < a.nodes(); ++k) acc += a[k].dot(b[k]);
    return tau * acc;
}

} // namespace

TEST_CASE("linearized state vanishes for a zero direction") {
    ToyProblem toy = make_vm_toy(32);
    RegParams p(0.1, 0.1);
    const Trajectory z = integrate_smoothed(toy.pd, p, toy.load);
    const Trajectory h(toy.grid, toy.load.dim());
    const LinearizedState lin = solve_linearized(toy.pd, p, toy.load, z, h);
    CHECK(cnorm(lin.eta) == 0.0);
}

TEST_CASE("linearized state matches the scalar closed form") {
    const double kappa = 1.0, lambda = 0.02, q = 2.2, r = 1.3, v = 1.0, w = 0.7;
    const double a = kappa / (1.0 + lambda * kappa);
    RegParams p(lambda, 0.1);
    Mat qm(1, 1), rm(1, 1);
    qm << q;
    rm << r;
    ProblemData pd(SymPosDefMap(qm), rm, Vec::Zero(1), FlowRule::linear(kappa));

    auto eta_exact = [&](double t) {
        const double aq = a * q;
        return a * r * w * (t / aq - (1.0 - std::exp(-aq * t)) / (aq * aq));
    };
    auto error_at = [&](Index N) {
        TimeGrid grid(1.0, N);
        const Trajectory load = Trajectory::from_function(
            grid, [&](double t) { return Vec::Constant(1, v * t); });
        const Trajectory h = Trajectory::from_function(
            grid, [&](double t) { return Vec::Constant(1, w * t); });
        const Trajectory z = integrate_smoothed(pd, p, load);
        const LinearizedState lin = solve_linearized(pd, p, load, z, h);
        double err = 0.0;
        for (Index k = 0; k <= N; ++k)
            err = std::max(err, std::abs(lin.eta[k][0] - eta_exact(grid.node(k))));
        return err;
    };
    const double e1 = error_at(64), e2 = error_at(128);
    CHECK(e2 <= 2e-3);
    CHECK(std::log2(e1 / e2) >= 0.8);
}

TEST_CASE("directional derivative of the solution map") {
    ToyProblem toy = make_vm_toy(64);
    RegParams p(0.1, 0.1);
    const Trajectory z = integrate_smoothed(toy.pd, p, toy.load);
    Rng rng(31);
    const Trajectory h = random_direction(rng, toy.grid, toy.load.dim());
    const LinearizedState lin = solve_linearized(toy.pd, p, toy.load, z, h);

    std::vector<double> ts{1e-2, 1e-3, 1e-4, 1e-5};
    std::vector<double> logt, loge;
    for (double t : ts) {
        const Trajectory zt = integrate_smoothed(toy.pd, p, shifted(toy.load, t, h));
        Trajectory diff = zt;
        for (Index k = 0; k < diff.nodes(); ++k) diff[k] -= z[k] + t * lin.eta[k];
        const double err = cnorm(diff);
        if (err > 1e-12) {
            logt.push_back(std::log(t));
            loge.push_back(std::log(err));
        }
    }
    REQUIRE(logt.size() >= 2);
    // Least-squares slope of log err against log t.
    double mx = 0, my = 0;
    for (size_t i = 0; i < logt.size(); ++i) {
        mx += logt[i];
        my += loge[i];
    }
    mx /= logt.size();
    my /= loge.size();
    double num = 0, den = 0;
    for (size_t i = 0; i < logt.size(); ++i) {
        num += (logt[i] - mx) * (loge[i] - my);
        den += (logt[i] - mx) * (logt[i] - mx);
    }
    CHECK(num / den >= 1.9);
}

TEST_CASE("second-order state: bilinearity, symmetry, expansion") {
    ToyProblem toy = make_vm_toy(48);
    RegParams p(0.1, 0.15);
    const Trajectory z = integrate_smoothed(toy.pd, p, toy.load);
    Rng rng(5);
    const Trajectory h1 = random_direction(rng, toy.grid, toy.load.dim());
    const Trajectory h2 = random_direction(rng, toy.grid, toy.load.dim());
    const Trajectory zero(toy.grid, toy.load.dim());

    const LinearizedState eta1 = solve_linearized(toy.pd, p, toy.load, z, h1);
    const LinearizedState eta2 = solve_linearized(toy.pd, p, toy.load, z, h2);
    const LinearizedState eta0 = solve_linearized(toy.pd, p, toy.load, z, zero);

    // h2 = 0 gives xi = 0.
    const Trajectory xi0 =
        solve_second_order(toy.pd, p, toy.load, z, h1, zero, eta1.eta, eta0.eta);
    CHECK(cnorm(xi0) == 0.0);

    // Symmetry under swapping the directions.
    const Trajectory xi12 =
        solve_second_order(toy.pd, p, toy.load, z, h1, h2, eta1.eta, eta2.eta);
    const Trajectory xi21 =
        solve_second_order(toy.pd, p, toy.load, z, h2, h1, eta2.eta, eta1.eta);
    CHECK(cnorm_diff(xi12, xi21) <= 1e-10 * (1.0 + cnorm(xi12)));

    // Quadratic expansion: S(l + t(h1+h2)) - S(l + t h1) - S(l + t h2) + S(l)
    // = t^2 xi[h1,h2] + o(t^2).
    auto expansion_residual = [&](double t) {
        Trajectory sum = shifted(toy.load, t, h1);
        for (Index k = 0; k < sum.nodes(); ++k) sum[k] += t * h2[k];
        const Trajectory z_sum = integrate_smoothed(toy.pd, p, sum);
        const Trajectory z_1 = integrate_smoothed(toy.pd, p, shifted(toy.load, t, h1));
        const Trajectory z_2 = integrate_smoothed(toy.pd, p, shifted(toy.load, t, h2));
        double err = 0.0;
        for (Index k = 0; k < z_sum.nodes(); ++k) {
            const Vec r = z_sum[k] - z_1[k] - z_2[k] + z[k] - t * t * xi12[k];
            err = std::max(err, r.norm());
        }
        return err / (t * t);
    };
    const double r2 = expansion_residual(1e-2);
    const double r3 = expansion_residual(1e-3);
    CHECK(r3 <= 0.2 * r2 + 1e-12);
}

TEST_CASE("adjoint state vanishes for a z-independent objective") {
    ToyProblem toy = make_vm_toy(32);
    RegParams p(0.1, 0.1);
    ObjectiveSpec spec;
    spec.gamma = 1.0;
    EndTimeObjective pure(spec, toy.ops, toy.data);
    const Trajectory z = integrate_smoothed(toy.pd, p, toy.load);
    const AdjointState adj = solve_adjoint(toy.pd, p, toy.load, z, pure);
    CHECK(cnorm(adj.phi) == 0.0);
}

TEST_CASE("adjoint satisfies the discrete recursion exactly") {
    ToyProblem toy = make_vm_toy(48);
    RegParams p(0.1, 0.1);
    const Trajectory z = integrate_smoothed(toy.pd, p, toy.load);
    const AdjointState adj = solve_adjoint(toy.pd, p, toy.load, z, toy.objective);
    const double tau = toy.grid.tau();
    for (Index k = toy.grid.N - 1; k >= 0; --k) {
        const Vec y = toy.pd.R * toy.load[k] - toy.pd.Q.matrix() * z[k];
        const Mat jac = smoothed_jacobian(toy.pd.rule, y, p);
        const Vec res =
            adj.phi[k] + tau * (toy.pd.Q.matrix() * (jac * adj.phi[k])) - adj.phi[k + 1];
        CHECK(res.norm() <= 1e-11 * (1.0 + adj.phi[k + 1].norm()));
    }
}

TEST_CASE("adjoint pairing equals the objective derivative along eta") {
    ToyProblem toy = make_vm_toy(48);
    RegParams p(0.1, 0.1);
    const Trajectory z = integrate_smoothed(toy.pd, p, toy.load);
    const AdjointState adj = solve_adjoint(toy.pd, p, toy.load, z, toy.objective);
    const double tau = toy.grid.tau();
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const Trajectory h = random_direction(rng, toy.grid, toy.load.dim());
        const LinearizedState lin = solve_linearized(toy.pd, p, toy.load, z, h);
        double pairing = 0.0;
        for (Index k = 1; k <= toy.grid.N; ++k) {
            const Vec y = toy.pd.R * toy.load[k] - toy.pd.Q.matrix() * z[k];
            pairing += tau * adj.phi[k].dot(smoothed_jvp(toy.pd.rule, y, Vec(toy.pd.R * h[k]), p));
        }
        const double dz_term =
            toy.objective.terminal_grad_z(z[toy.grid.N], toy.load[toy.grid.N])
                .dot(lin.eta[toy.grid.N]);
        CHECK(pairing == doctest::Approx(-dz_term).epsilon(1e-9));
    }
}

TEST_CASE("adjoint matches the scalar closed-form backward equation") {
    const double kappa = 1.0, lambda = 0.02;
    const double a = kappa / (1.0 + lambda * kappa);
    RegParams p(lambda, 0.1);
    auto run = [&](Index N) {
        ToyProblem toy = make_scalar_linear(kappa, N);
        const double q = toy.ops.Q.matrix()(0, 0);
        const Trajectory z = integrate_smoothed(toy.pd, p, toy.load);
        const AdjointState adj = solve_adjoint(toy.pd, p, toy.load, z, toy.objective);
        const double phi_T = adj.terminal[0];
        double err = 0.0;
        for (Index k = 1; k <= N; ++k) {
            const double t = toy.grid.node(k);
            const double exact = phi_T * std::exp(-q * a * (toy.grid.T - t));
            err = std::max(err, std::abs(adj.phi[k][0] - exact));
        }
        return err;
    };
    const double e1 = run(64), e2 = run(128);
    CHECK(e2 <= 5e-3);
    CHECK(std::log2(e1 / e2) >= 0.8);
}

TEST_CASE("reduced gradient of the pure regularizer is the discrete second difference") {
    ToyProblem toy = make_vm_toy(32);
    RegParams p(0.1, 0.1);
    ObjectiveSpec spec;
    spec.gamma = 0.3;
    EndTimeObjective pure(spec, toy.ops, toy.data);
    const Trajectory g = reduced_gradient(toy.pd, p, toy.load, pure);

    const double tau = toy.grid.tau();
    const Index N = toy.grid.N;
    CHECK(g[0].norm() == 0.0);
    for (Index k = 1; k <= N; ++k) {
        Vec hand;
        if (k < N)
            hand = (spec.gamma / tau) *
                   (2.0 * toy.load[k] - toy.load[k - 1] - toy.load[k + 1]);
        else
            hand = (spec.gamma / tau) * (toy.load[N] - toy.load[N - 1]);
        CHECK((g[k] - hand).norm() <= 1e-12 * (1.0 + hand.norm()));
    }
}

TEST_CASE("reduced gradient agrees with central differences") {
    ToyProblem toy = make_vm_toy(48);
    RegParams p(0.1, 0.1);
    const Trajectory g = reduced_gradient(toy.pd, p, toy.load, toy.objective);
    Rng rng(77);
    const double t = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
        const Trajectory h = random_direction(rng, toy.grid, toy.load.dim());
        const double fp = evaluate_objective(toy.pd, p, shifted(toy.load, t, h), toy.objective);
        const double fm = evaluate_objective(toy.pd, p, shifted(toy.load, -t, h), toy.objective);
        const double fd = (fp - fm) / (2.0 * t);
        double gh = 0.0;
        for (Index k = 0; k <= toy.grid.N; ++k) gh += g[k].dot(h[k]);
        CHECK(std::abs(fd - gh) <= 1e-6 * (1.0 + std::abs(gh)));
    }
}

TEST_CASE("three routes to the directional derivative agree") {
    ToyProblem toy = make_vm_toy(48);
    RegParams p(0.1, 0.1);
    const Trajectory z = integrate_smoothed(toy.pd, p, toy.load);
    const Trajectory g = reduced_gradient(toy.pd, p, toy.load, toy.objective);
    const double tau = toy.grid.tau();
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        const Trajectory h = random_direction(rng, toy.grid, toy.load.dim());

        // (i) central finite difference of the reduced objective.
        const double t = 1e-6;
        const double fd = (evaluate_objective(toy.pd, p, shifted(toy.load, t, h), toy.objective) -
                           evaluate_objective(toy.pd, p, shifted(toy.load, -t, h), toy.objective)) /
                          (2.0 * t);

        // (ii) objective derivative through the linearized state.
        const LinearizedState lin = solve_linearized(toy.pd, p, toy.load, z, h);
        double via_eta =
            toy.objective.terminal_grad_z(z[toy.grid.N], toy.load[toy.grid.N])
                .dot(lin.eta[toy.grid.N]) +
            toy.objective.terminal_grad_l(z[toy.grid.N], toy.load[toy.grid.N]).dot(h[toy.grid.N]);
        for (Index k = 0; k < toy.grid.N; ++k)
            via_eta += toy.objective.spec().gamma *
                       (toy.load[k + 1] - toy.load[k]).dot(h[k + 1] - h[k]) / tau;

        // (iii) gradient inner product.
        double gh = 0.0;
        for (Index k = 0; k <= toy.grid.N; ++k) gh += g[k].dot(h[k]);

        const double scale = 1.0 + std::abs(gh);
        CHECK(std::abs(fd - gh) <= 1e-6 * scale);
        CHECK(std::abs(via_eta - gh) <= 1e-9 * scale);
    }
}

TEST_CASE("hessian quadratic form") {
    ToyProblem toy = make_vm_toy(48);
    RegParams p(0.1, 0.1);
    Rng rng(3);

    // Zero direction.
    const Trajectory zero(toy.grid, toy.load.dim());
    CHECK(hessian_quadratic_form(toy.pd, p, toy.load, toy.objective, zero) == 0.0);

    // Pure regularizer: the form reduces to gamma |dh/dt|^2 (phi = 0 kills
    // the flow-rule curvature term).
    ObjectiveSpec spec;
    spec.gamma = 0.25;
    EndTimeObjective pure(spec, toy.ops, toy.data);
    const Trajectory h = random_direction(rng, toy.grid, toy.load.dim());
    const double form = hessian_quadratic_form(toy.pd, p, toy.load, pure, h);
    double quad = 0.0;
    for (Index k = 0; k < toy.grid.N; ++k)
        quad += (h[k + 1] - h[k]).squaredNorm() / toy.grid.tau();
    CHECK(form == doctest::Approx(spec.gamma * quad).epsilon(1e-10));

    // Second-difference check for the tracking objective.
    for (int trial = 0; trial < 3; ++trial) {
        const Trajectory dir = random_direction(rng, toy.grid, toy.load.dim());
        const double f0 = evaluate_objective(toy.pd, p, toy.load, toy.objective);
        const double t = 1e-3;
        const double fp = evaluate_objective(toy.pd, p, shifted(toy.load, t, dir), toy.objective);
        const double fm = evaluate_objective(toy.pd, p, shifted(toy.load, -t, dir), toy.objective);
        const double fd = (fp - 2.0 * f0 + fm) / (t * t);
        const double exact = hessian_quadratic_form(toy.pd, p, toy.load, toy.objective, dir);
        CHECK(std::abs(fd - exact) <= 1e-4 * (1.0 + std::abs(exact)));
    }
}

TEST_CASE("solution-map derivative is linear in the direction") {
    ToyProblem toy = make_vm_toy(32);
    RegParams p(0.1, 0.1);
    const Trajectory z = integrate_smoothed(toy.pd, p, toy.load);
    Rng rng(8);
    const Trajectory h1 = random_direction(rng, toy.grid, toy.load.dim());
    const Trajectory h2 = random_direction(rng, toy.grid, toy.load.dim());
    Trajectory combo(toy.grid, toy.load.dim());
    for (Index k = 0; k <= toy.grid.N; ++k) combo[k] = 2.0 * h1[k] - 0.5 * h2[k];

    const Trajectory eta1 = solve_linearized(toy.pd, p, toy.load, z, h1).eta;
    const Trajectory eta2 = solve_linearized(toy.pd, p, toy.load, z, h2).eta;
    const Trajectory eta_combo = solve_linearized(toy.pd, p, toy.load, z, combo).eta;
    for (Index k = 0; k <= toy.grid.N; ++k)
        CHECK((eta_combo[k] - 2.0 * eta1[k] + 0.5 * eta2[k]).norm() <=
              1e-10 * (1.0 + eta_combo[k].norm()));
}

TEST_CASE("second derivative is bounded over unit pairs with a frozen constant") {
    const double frozen_c = 5.0;
    ToyProblem toy = make_vm_toy(32);
    RegParams p(0.1, 0.15);
    const Trajectory z = integrate_smoothed(toy.pd, p, toy.load);
    Rng rng(19);
    for (int trial = 0; trial < 100; ++trial) {
        Trajectory h1 = random_direction(rng, toy.grid, toy.load.dim());
        Trajectory h2 = random_direction(rng, toy.grid, toy.load.dim());
        const double n1 = h1norm(h1), n2 = h1norm(h2);
        const LinearizedState e1 = solve_linearized(toy.pd, p, toy.load, z, h1);
        const LinearizedState e2 = solve_linearized(toy.pd, p, toy.load, z, h2);
        const Trajectory xi =
            solve_second_order(toy.pd, p, toy.load, z, h1, h2, e1.eta, e2.eta);
        CHECK(cnorm(xi) <= frozen_c * n1 * n2);
    }
}

TEST_CASE("derivative map is Lipschitz in the control with a frozen constant") {
    const double frozen_l = 10.0;
    ToyProblem toy = make_vm_toy(32);
    RegParams p(0.1, 0.15);
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const Trajectory d1 = random_direction(rng, toy.grid, toy.load.dim());
        const Trajectory l2 = shifted(toy.load, 0.1, d1);
        const Trajectory z1 = integrate_smoothed(toy.pd, p, toy.load);
        const Trajectory z2 = integrate_smoothed(toy.pd, p, l2);
        const Trajectory h = random_direction(rng, toy.grid, toy.load.dim());
        const Trajectory eta1 = solve_linearized(toy.pd, p, toy.load, z1, h).eta;
        const Trajectory eta2 = solve_linearized(toy.pd, p, l2, z2, h).eta;
        Trajectory diff_l = l2;
        for (Index k = 0; k < diff_l.nodes(); ++k) diff_l[k] -= toy.load[k];
        CHECK(cnorm_diff(eta1, eta2) <= frozen_l * h1norm(diff_l) * h1norm(h));
    }
}
