#include "monoflow/linalg.hpp"

#include <cmath>

#include "monoflow/rng.hpp"

namespace monoflow {

namespace {

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

double power_iteration_norm(const Mat& m) {
    Rng rng(0x9e3779b97f4a7c15ULL);
    Vec x = rng.normal_vector(m.rows());
    x.normalize();
    double lam = 0.0;
    for (int it = 0; it < 200; ++it) {
        Vec y = m * x;
        double next = y.norm();
        if (next == 0.0) return 0.0;
        y /= next;
        if (it > 3 && std::abs(next - lam) <= 1e-12 * next) return next;
        lam = next;
        x = y;
    }
    return lam;
}

double inverse_power_min_eig(const Mat& m, const Eigen::LLT<Mat>& llt, double lam_max) {
    Rng rng(0x853c49e6748fea9bULL);
    Vec x = rng.normal_vector(m.rows());
    x.normalize();
    const int cap = 10000;
    for (int it = 0; it < cap; ++it) {
        Vec y = llt.solve(x);
        y.normalize();
        const double mu = y.dot(m * y);
        const double res = (m * y - mu * y).norm();
        if (res <= 5e-7 * lam_max) return mu;
        x = y;
    }
    throw NoConvergence("min_eig_estimate", cap);
}

} // namespace

SymPosDefMap::SymPosDefMap(Mat m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols())
        throw DimensionMismatch("SymPosDefMap", m_.cols(), m_.rows());
    if (m_.size() == 0) throw NonSpd("SymPosDefMap: empty matrix");
    if (!m_.allFinite()) throw NonSpd("SymPosDefMap: non-finite entries");
    const double scale = max_abs(m_);
    const double asym = max_abs(m_ - m_.transpose());
    if (asym > 1e-12 * scale)
        throw NonSpd("SymPosDefMap: asymmetry " + std::to_string(asym) +
                     " exceeds tolerance");
    llt_.compute(m_);
    if (llt_.info() != Eigen::Success)
        throw NonSpd("SymPosDefMap: Cholesky factorization failed");
    op_norm_ = power_iteration_norm(m_);
    min_eig_ = inverse_power_min_eig(m_, llt_, op_norm_);
    if (!(min_eig_ > 0.0))
        throw NonSpd("SymPosDefMap: smallest eigenvalue estimate " +
                     std::to_string(min_eig_) + " not positive");
}

Vec SymPosDefMap::apply(const Vec& x) const {
    if (x.size() != dim()) throw DimensionMismatch("SymPosDefMap::apply", x.size(), dim());
    return m_ * x;
}

Vec SymPosDefMap::solve(const Vec& rhs) const {
    if (rhs.size() != dim()) throw DimensionMismatch("SymPosDefMap::solve", rhs.size(), dim());
    return llt_.solve(rhs);
}

Mat SymPosDefMap::solve(const Mat& rhs) const {
    if (rhs.rows() != dim()) throw DimensionMismatch("SymPosDefMap::solve", rhs.rows(), dim());
    return llt_.solve(rhs);
}

Vec solve_spd(const SymPosDefMap& map, const Vec& rhs) { return map.solve(rhs); }

double min_eig_estimate(const SymPosDefMap& map) { return map.min_eig(); }

Vec solve_tridiagonal(std::span<const double> sub, std::span<const double> diag,
                      std::span<const double> sup, const Vec& rhs) {
    const Index n = static_cast<Index>(diag.size());
    if (n == 0) throw DimensionMismatch("solve_tridiagonal: empty system");
    if (static_cast<Index>(sub.size()) != n - 1 || static_cast<Index>(sup.size()) != n - 1)
        throw DimensionMismatch("solve_tridiagonal: off-diagonal lengths must be n-1");
    if (rhs.size() != n) throw DimensionMismatch("solve_tridiagonal", rhs.size(), n);

    Vec c(n - 1 > 0 ? n - 1 : 0), d(n);
    double pivot = diag[0];
    if (pivot == 0.0 || !std::isfinite(pivot)) throw SingularPivot(0, pivot);
    if (n > 1) c[0] = sup[0] / pivot;
    d[0] = rhs[0] / pivot;
    for (Index i = 1; i < n; ++i) {
        pivot = diag[i] - sub[i - 1] * c[i - 1];
        if (pivot == 0.0 || !std::isfinite(pivot)) throw SingularPivot(i, pivot);
        if (i < n - 1) c[i] = sup[i] / pivot;
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / pivot;
    }
    Vec x(n);
    x[n - 1] = d[n - 1];
    for (Index i = n - 2; i >= 0; --i) x[i] = d[i] - c[i] * x[i + 1];
    return x;
}

double weighted_inner_product(const SymPosDefMap& q, const Vec& h1, const Vec& h2) {
    return q.solve(h1).dot(h2);
}

} // namespace monoflow
