#pragma once

#include "monoflow/evolution.hpp"
#include "monoflow/objective.hpp"

namespace monoflow {

/// Solution of the linearized state equation
///   d eta/dt = A_s'(R l - Q z)(R h - Q eta), eta(0) = 0,
/// discretized as the exact derivative of the implicit Euler step map.
struct LinearizedState {
    Trajectory eta;
    Trajectory direction;
};

/// Backward-in-time adjoint state. The trajectory satisfies the discrete
/// adjoint recursion exactly; node 0 is filled by one extra recursion step
/// for a full-grid trajectory but does not enter the gradient.
struct AdjointState {
    Trajectory phi;
    Vec terminal;
};

LinearizedState solve_linearized(const ProblemData& pd, const RegParams& p,
                                 const Trajectory& load, const Trajectory& z,
                                 const Trajectory& h);

/// Second derivative of the control-to-state map in directions (h1, h2):
///   d xi/dt = A_s''(y)[R h1 - Q eta1, R h2 - Q eta2] - A_s'(y) Q xi, xi(0) = 0.
Trajectory solve_second_order(const ProblemData& pd, const RegParams& p, const Trajectory& load,
                              const Trajectory& z, const Trajectory& h1, const Trajectory& h2,
                              const Trajectory& eta1, const Trajectory& eta2);

/// Exact transpose of the discrete forward linearization:
///   (I + tau Q A_s'(y_N)) phi_N = -dPsi2/dz(z_N, l_N),
///   (I + tau Q A_s'(y_k)) phi_k = phi_{k+1}.
AdjointState solve_adjoint(const ProblemData& pd, const RegParams& p, const Trajectory& load,
                           const Trajectory& z, const EndTimeObjective& objective);

/// Euclidean representer g of the reduced derivative: F'(l) h = <g, h> for
/// every grid direction h with h_0 = 0 (the node-0 component is zeroed).
Trajectory reduced_gradient(const ProblemData& pd, const RegParams& p, const Trajectory& load,
                            const EndTimeObjective& objective);

/// F''(l) h^2 assembled from the linearized state, the adjoint state and the
/// second derivative of the flow rule.
double hessian_quadratic_form(const ProblemData& pd, const RegParams& p, const Trajectory& load,
                              const EndTimeObjective& objective, const Trajectory& h);

} // namespace monoflow
