#pragma once

#include <span>

#include <Eigen/Dense>

#include "monoflow/errors.hpp"

namespace monoflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Dense symmetric positive definite operator with a cached Cholesky
/// factorization. Construction validates symmetry
/// (max|M - M^T| <= 1e-12 * max|M|) and positive definiteness, and computes
/// eigenvalue extent estimates. Immutable afterwards, safe to share.
class SymPosDefMap {
public:
    explicit SymPosDefMap(Mat m);

    const Mat& matrix() const { return m_; }
    Index dim() const { return m_.rows(); }

    Vec apply(const Vec& x) const;
    Vec solve(const Vec& rhs) const;
    Mat solve(const Mat& rhs) const;

    /// Smallest eigenvalue, from inverse power iteration at construction.
    double min_eig() const { return min_eig_; }

    /// Operator 2-norm (largest eigenvalue) from power iteration.
    double op_norm() const { return op_norm_; }

private:
    Mat m_;
    Eigen::LLT<Mat> llt_;
    double min_eig_ = -1.0;
    double op_norm_ = -1.0;
};

/// Solves M x = rhs for a symmetric positive definite map.
/// The residual satisfies |M x - rhs| <= 1e-10 (|M| |x| + |rhs|).
Vec solve_spd(const SymPosDefMap& map, const Vec& rhs);

/// Smallest eigenvalue of a symmetric positive definite map via inverse
/// power iteration, accurate to 1e-6 * lambda_max.
double min_eig_estimate(const SymPosDefMap& map);

/// Thomas algorithm for a tridiagonal system. `sub` and `sup` have length
/// n-1, `diag` has length n. Throws SingularPivot when elimination breaks down.
Vec solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                      std::span<const double> sup, const Vec& rhs);

/// Bilinear form <Q^{-1} h1, h2>, the weighted inner product induced by an
/// SPD map (used in diagnostics of the transformed evolution).
double weighted_inner_product(const SymPosDefMap& q, const Vec& h1, const Vec& h2);

} // namespace monoflow
