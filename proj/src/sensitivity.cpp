#include "monoflow/sensitivity.hpp"

namespace monoflow {

namespace {

void check_pair(const ProblemData& pd, const Trajectory& load, const Trajectory& z) {
    if (!(load.grid() == z.grid())) throw Error("sensitivity: load and state grids differ");
    if (load.dim() != pd.control_dim())
        throw DimensionMismatch("sensitivity: load", load.dim(), pd.control_dim());
    if (z.dim() != pd.state_dim())
        throw DimensionMismatch("sensitivity: state", z.dim(), pd.state_dim());
}

Vec state_argument(const ProblemData& pd, const Trajectory& load, const Trajectory& z, Index k) {
    return pd.R * load[k] - pd.Q.matrix() * z[k];
}

Vec solve_step(const Mat& lhs, const Vec& rhs, Index k) {
    Vec x = lhs.partialPivLu().solve(rhs);
    if (!x.allFinite()) throw SingularStep(k);
    return x;
}

} // namespace

LinearizedState solve_linearized(const ProblemData& pd, const RegParams& p,
                                 const Trajectory& load, const Trajectory& z,
                                 const Trajectory& h) {
    check_pair(pd, load, z);
    if (!(h.grid() == load.grid()) || h.dim() != load.dim())
        throw Error("solve_linearized: direction grid mismatch");
    const double tau = load.grid().tau();
    const Index n = pd.state_dim();
    Trajectory eta(load.grid(), n);
    const Mat id = Mat::Identity(n, n);
    for (Index k = 0; k < load.grid().N; ++k) {
        const Vec y = state_argument(pd, load, z, k + 1);
        const Mat jac = smoothed_jacobian(pd.rule, y, p);
        const Vec rhs = eta[k] + tau * (jac * (pd.R * h[k + 1]));
        eta[k + 1] = solve_step(id + tau * (jac * pd.Q.matrix()), rhs, k);
    }
    return LinearizedState{std::move(eta), h};
}

Trajectory solve_second_order(const ProblemData& pd, const RegParams& p, const Trajectory& load,
                              const Trajectory& z, const Trajectory& h1, const Trajectory& h2,
                              const Trajectory& eta1, const Trajectory& eta2) {
    check_pair(pd, load, z);
    const double tau = load.grid().tau();
    const Index n = pd.state_dim();
    Trajectory xi(load.grid(), n);
    const Mat id = Mat::Identity(n, n);
    for (Index k = 0; k < load.grid().N; ++k) {
        const Vec y = state_argument(pd, load, z, k + 1);
        const Vec w1 = pd.R * h1[k + 1] - pd.Q.matrix() * eta1[k + 1];
        const Vec w2 = pd.R * h2[k + 1] - pd.Q.matrix() * eta2[k + 1];
        const Vec source = smoothed_hvp(pd.rule, y, w1, w2, p);
        const Mat jac = smoothed_jacobian(pd.rule, y, p);
        xi[k + 1] = solve_step(id + tau * (jac * pd.Q.matrix()), Vec(xi[k] + tau * source), k);
    }
    return xi;
}

AdjointState solve_adjoint(const ProblemData& pd, const RegParams& p, const Trajectory& load,
                           const Trajectory& z, const EndTimeObjective& objective) {
    check_pair(pd, load, z);
    const double tau = load.grid().tau();
    const Index n = pd.state_dim();
    const Index N = load.grid().N;
    Trajectory phi(load.grid(), n);
    const Mat id = Mat::Identity(n, n);

    const Vec grad_z = objective.terminal_grad_z(z[N], load[N]);
    {
        const Mat jac = smoothed_jacobian(pd.rule, state_argument(pd, load, z, N), p);
        phi[N] = solve_step(id + tau * (pd.Q.matrix() * jac), Vec(-grad_z), N);
    }
    for (Index k = N - 1; k >= 0; --k) {
        const Mat jac = smoothed_jacobian(pd.rule, state_argument(pd, load, z, k), p);
        phi[k] = solve_step(id + tau * (pd.Q.matrix() * jac), phi[k + 1], k);
    }
    return AdjointState{std::move(phi), Vec(-grad_z)};
}

Trajectory reduced_gradient(const ProblemData& pd, const RegParams& p, const Trajectory& load,
                            const EndTimeObjective& objective) {
    const Trajectory z = integrate_smoothed(pd, p, load);
    const AdjointState adj = solve_adjoint(pd, p, load, z, objective);
    const double tau = load.grid().tau();
    const double gamma = objective.spec().gamma;
    const Index N = load.grid().N;

    Trajectory g(load.grid(), load.dim());
    for (Index k = 1; k <= N; ++k) {
        const Mat jac = smoothed_jacobian(pd.rule, state_argument(pd, load, z, k), p);
        Vec gk = -tau * (pd.R.transpose() * (jac * adj.phi[k]));
        // d/dl_k of gamma/2 sum |l_{j+1} - l_j|^2 / tau.
        if (k < N)
            gk += (gamma / tau) * (2.0 * load[k] - load[k - 1] - load[k + 1]);
        else
            gk += (gamma / tau) * (load[N] - load[N - 1]);
        if (k == N) gk += objective.terminal_grad_l(z[N], load[N]);
        g[k] = gk;
    }
    g[0] = Vec::Zero(load.dim()); // directions are constrained to h(0) = 0
    return g;
}

double hessian_quadratic_form(const ProblemData& pd, const RegParams& p, const Trajectory& load,
                              const EndTimeObjective& objective, const Trajectory& h) {
    const Trajectory z = integrate_smoothed(pd, p, load);
    const LinearizedState lin = solve_linearized(pd, p, load, z, h);
    const AdjointState adj = solve_adjoint(pd, p, load, z, objective);
    const double tau = load.grid().tau();
    const Index N = load.grid().N;

    const double semi = h1seminorm(h);
    double value = objective.terminal_hessian_form(lin.eta[N], h[N]) +
                   objective.spec().gamma * semi * semi;
    for (Index k = 1; k <= N; ++k) {
        const Vec y = state_argument(pd, load, z, k);
        const Vec w = pd.R * h[k] - pd.Q.matrix() * lin.eta[k];
        value -= tau * adj.phi[k].dot(smoothed_hvp(pd.rule, y, w, w, p));
    }
    return value;
}

} // namespace monoflow
