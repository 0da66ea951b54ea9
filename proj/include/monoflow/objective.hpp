#pragma once

#include "monoflow/evolution.hpp"
#include "monoflow/homogenized.hpp"

namespace monoflow {

/// Weights and targets of the tracking objective
///   J(z, l) = alpha/2 |u(T) - u_d|^2 + beta/2 |avg Sigma(T) - sigma_d|^2
///           + gamma/2 |dl/dt|^2_{L2}.
struct ObjectiveSpec {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 1.0;
    Vec u_target;     // dimension n_macro (ignored when alpha = 0)
    Vec sigma_target; // dimension of the averaged stress (ignored when beta = 0)

    void validate() const;
};

/// Bound evaluator of the end-time objective. The tracked displacement and
/// averaged stress are affine in (z(T), l(T)); the four sensitivity matrices
/// are precomputed at construction so that values and derivatives of the
/// terminal term are cheap.
class EndTimeObjective {
public:
    /// Tracking objective on an assembled plasticity instance.
    EndTimeObjective(ObjectiveSpec spec, const AssembledOperators& ops,
                     const PlasticityData& data);

    /// Pure-regularizer objective (requires alpha = beta = 0).
    EndTimeObjective(ObjectiveSpec spec, Index state_dim, Index control_dim);

    const ObjectiveSpec& spec() const { return spec_; }
    Index state_dim() const { return state_dim_; }
    Index control_dim() const { return control_dim_; }

    /// Terminal tracking term Psi2(z(T), l(T)).
    double terminal(const Vec& z_end, const Vec& l_end) const;
    Vec terminal_grad_z(const Vec& z_end, const Vec& l_end) const;
    Vec terminal_grad_l(const Vec& z_end, const Vec& l_end) const;
    /// Quadratic form of the (constant) terminal Hessian in a direction
    /// (eta_end, h_end).
    double terminal_hessian_form(const Vec& eta_end, const Vec& h_end) const;

    /// Full objective from a state trajectory and a control trajectory.
    double value(const Trajectory& z, const Trajectory& load) const;

private:
    ObjectiveSpec spec_;
    Index state_dim_;
    Index control_dim_;
    bool has_tracking_ = false;
    Mat u_of_z_, u_of_l_;         // u(T) = u_of_z z(T) + u_of_l l(T)
    Mat sigma_of_z_, sigma_of_l_; // avg Sigma(T) likewise
};

} // namespace monoflow
