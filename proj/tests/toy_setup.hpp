#pragma once

// Shared desk-scale instances for the unit and acceptance tests. The von
// Mises instance matches configs/vonmises_toy.json; the scalar instance
// carries closed-form ODE oracles.

#include "monoflow/control.hpp"
#include "monoflow/homogenized.hpp"
#include "monoflow/rng.hpp"

namespace monoflow::testing {

struct ToyProblem {
    PlasticityData data;
    AssembledOperators ops;
    ProblemData pd;
    TimeGrid grid;
    Trajectory load;
    EndTimeObjective objective;
};

inline Trajectory ramp_load(const TimeGrid& grid, const Vec& amplitude) {
    return Trajectory::from_function(
        grid, [&](double t) { return Vec((t / grid.T) * amplitude); });
}

inline constexpr double kVmSigma0 = 0.45;
inline constexpr std::uint64_t kVmSeed = 42;

inline ToySizes vm_toy_sizes() {
    ToySizes s;
    s.d = 3;
    s.n_pts = 2;
    s.n_displacement = 12;
    s.n_macro = 6;
    s.m_internal = 18;
    s.p_loads = 4;
    return s;
}

inline Vec vm_load_amplitude() {
    Vec a(4);
    a << 1.6, -1.1, 0.9, -0.6;
    return a;
}

/// The shipped von Mises instance: m = 18, plastic flow active under the
/// ramp load on [0, 1].
inline ToyProblem make_vm_toy(Index N = 256, double T = 1.0) {
    PlasticityData data = make_toy_instance(kVmSeed, vm_toy_sizes(), 1.0, 0.5);
    AssembledOperators ops = assemble(data);
    FlowRule rule = FlowRule::von_mises(kVmSigma0, data.d, data.n_pts);
    ProblemData pd(ops.Q, ops.R, Vec::Zero(data.n_internal()), rule);
    TimeGrid grid(T, N);
    Trajectory load = ramp_load(grid, vm_load_amplitude());

    ObjectiveSpec spec;
    spec.alpha = 1.0;
    spec.beta = 0.5;
    spec.gamma = 0.01;
    spec.u_target = Vec::Constant(data.n_macro, 0.05);
    spec.sigma_target = Vec::Zero(data.avg.rows());
    EndTimeObjective objective(spec, ops, data);

    return ToyProblem{std::move(data), std::move(ops), std::move(pd), grid, std::move(load),
                      std::move(objective)};
}

/// Scalar instance (m = 1) realized as a one-point plasticity layout with a
/// random 4x1 internal-to-strain map; used with the Linear flow rule where
/// every solver has a closed-form oracle.
inline ToyProblem make_scalar_linear(double kappa, Index N = 128, double T = 1.0,
                                     double obj_alpha = 1.0, double obj_gamma = 0.05) {
    ToySizes s;
    s.d = 2;
    s.n_pts = 1;
    s.n_displacement = 2;
    s.n_macro = 1;
    s.m_internal = 1;
    s.p_loads = 1;
    PlasticityData data = make_toy_instance(7, s, 1.0, 0.5);
    AssembledOperators ops = assemble(data);
    ProblemData pd(ops.Q, ops.R, Vec::Zero(1), FlowRule::linear(kappa));
    TimeGrid grid(T, N);
    Trajectory load = ramp_load(grid, Vec::Constant(1, 1.0));

    ObjectiveSpec spec;
    spec.alpha = obj_alpha;
    spec.gamma = obj_gamma;
    spec.u_target = Vec::Constant(1, 0.4);
    EndTimeObjective objective(spec, ops, data);

    return ToyProblem{std::move(data), std::move(ops), std::move(pd), grid, std::move(load),
                      std::move(objective)};
}

} // namespace monoflow::testing
