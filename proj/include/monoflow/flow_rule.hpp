#pragma once

#include "monoflow/linalg.hpp"

namespace monoflow {

/// Regularization parameters: Yosida parameter lambda and smoothing width
/// epsilon for the regularized max-function.
struct RegParams {
    RegParams(double lambda_, double epsilon_);

    double lambda;
    double epsilon;
};

/// A maximal monotone operator together with its resolvent, Yosida map and
/// smoothed evaluation.
///
/// Three kinds are built in:
///  - VonMises: subdifferential of the indicator of the admissible stress
///    set {tau : |tau^D| <= sigma0}, acting blockwise on n_pts flattened
///    symmetric d x d matrices (vectors of length n_pts * d * d).
///  - Box: subdifferential of the indicator of a componentwise interval.
///  - Linear: the single-valued operator h -> kappa h.
class FlowRule {
public:
    enum class Kind { VonMises, Box, Linear };

    static FlowRule von_mises(double sigma0, int d, int n_pts);
    static FlowRule box(Vec lo, Vec hi);
    static FlowRule linear(double kappa);

    Kind kind() const { return kind_; }

    double sigma0() const { return sigma0_; }
    int spatial_dim() const { return d_; }
    int n_pts() const { return n_pts_; }
    const Vec& lo() const { return lo_; }
    const Vec& hi() const { return hi_; }
    double kappa() const { return kappa_; }

    /// Ambient dimension, or -1 when the rule applies to any dimension.
    Index dim() const;
    void check_dim(Index n) const;

private:
    FlowRule() = default;

    Kind kind_ = Kind::Linear;
    double sigma0_ = 0.0;
    int d_ = 0;
    int n_pts_ = 0;
    Vec lo_, hi_;
    double kappa_ = 0.0;
};

/// Resolvent (I + lambda A)^{-1} h. For the indicator rules this is the
/// metric projection onto the feasible set, independent of lambda.
Vec resolvent(const FlowRule& rule, const Vec& h, double lambda);

/// Yosida approximation A_lambda(h) = (h - resolvent(h, lambda)) / lambda.
Vec yosida(const FlowRule& rule, const Vec& h, double lambda);

/// Minimal section A^0(h), the least-norm element of A(h). Zero throughout
/// the domain for the indicator rules; kappa h for the linear rule.
/// Throws OutsideDomain (with the distance) when h is not in D(A) within
/// 1e-10.
Vec minimal_section(const FlowRule& rule, const Vec& h);

/// Distance of h to the domain of A (zero inside).
double domain_distance(const FlowRule& rule, const Vec& h);

/// C^2 regularization of r -> max{0, r}: equal to max{0, r} for |r| >= eps,
/// a cubic blend on |r| < eps, with |max_eps(r) - max{0, r}| <= (3/16) eps.
double smoothed_max(double r, double eps);
double smoothed_max_d1(double r, double eps);
double smoothed_max_d2(double r, double eps);

/// Smoothed Yosida operator A_{lambda,eps}. For VonMises this is
/// (1/lambda) max_eps(1 - sigma0/|tau^D|) tau^D blockwise (zero on blocks
/// with tau^D = 0). Box uses the smoothed max componentwise; for Linear the
/// Yosida map is already smooth and is returned unchanged.
Vec smoothed_eval(const FlowRule& rule, const Vec& tau, const RegParams& p);

/// Directional derivative A_{lambda,eps}'(tau) h.
Vec smoothed_jvp(const FlowRule& rule, const Vec& tau, const Vec& h, const RegParams& p);

/// Second derivative A_{lambda,eps}''(tau)[h1, h2], symmetric and bilinear.
Vec smoothed_hvp(const FlowRule& rule, const Vec& tau, const Vec& h1, const Vec& h2,
                 const RegParams& p);

/// Dense Jacobian of the smoothed operator at tau (block diagonal for
/// VonMises, diagonal for Box, a multiple of the identity for Linear).
Mat smoothed_jacobian(const FlowRule& rule, const Vec& tau, const RegParams& p);

/// An element of the generalized Jacobian of the (unsmoothed) Yosida map,
/// used by the semismooth Newton solvers.
Mat yosida_jacobian(const FlowRule& rule, const Vec& h, double lambda);

/// Deviator of a flattened d x d matrix block (row-major), tau - tr(tau)/d I.
Vec deviator(const Vec& block, int d);
double block_trace(const Vec& block, int d);

} // namespace monoflow
