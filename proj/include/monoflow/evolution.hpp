#pragma once

#include <functional>
#include <string>
#include <vector>

#include "monoflow/flow_rule.hpp"
#include "monoflow/linalg.hpp"

namespace monoflow {

/// Uniform grid 0 = t_0 < ... < t_N = T.
struct TimeGrid {
    TimeGrid(double T_, Index N_);

    double T;
    Index N;

    double tau() const { return T / static_cast<double>(N); }
    double node(Index k) const { return T * static_cast<double>(k) / static_cast<double>(N); }

    bool operator==(const TimeGrid& other) const { return T == other.T && N == other.N; }
};

/// Grid-sampled path in R^m; piecewise-linear interpolation in time is the
/// canonical continuous representative.
class Trajectory {
public:
    Trajectory(TimeGrid grid, Index space_dim);
    Trajectory(TimeGrid grid, std::vector<Vec> values);

    static Trajectory constant(TimeGrid grid, const Vec& value);
    static Trajectory from_function(TimeGrid grid, const std::function<Vec(double)>& f);

    const TimeGrid& grid() const { return grid_; }
    Index dim() const { return space_dim_; }
    Index nodes() const { return grid_.N + 1; }

    const Vec& operator[](Index k) const { return values_[static_cast<size_t>(k)]; }
    Vec& operator[](Index k) { return values_[static_cast<size_t>(k)]; }

    /// Piecewise-linear value at time t in [0, T].
    Vec interpolate(double t) const;

    /// Same path sampled on a grid with factor-times more steps.
    Trajectory refined(int factor) const;

    /// Restriction to a coarser grid; N must be divisible by coarse_N.
    Trajectory restricted(Index coarse_N) const;

private:
    TimeGrid grid_;
    Index space_dim_;
    std::vector<Vec> values_;
};

/// max over nodes of the Euclidean norm.
double cnorm(const Trajectory& tr);
/// Trapezoid quadrature of the squared norm, square-rooted.
double l2norm(const Trajectory& tr);
/// L2 norm of the forward difference quotients.
double h1seminorm(const Trajectory& tr);
double h1norm(const Trajectory& tr);

double cnorm_diff(const Trajectory& a, const Trajectory& b);

/// One evolution problem dz/dt in A(R l - Q z), z(0) = z0.
struct ProblemData {
    ProblemData(SymPosDefMap Q_, Mat R_, Vec z0_, FlowRule rule_, double gamma_q_ = -1.0);

    SymPosDefMap Q;
    Mat R;
    Vec z0;
    FlowRule rule;
    double gamma_q;

    Index state_dim() const { return z0.size(); }
    Index control_dim() const { return R.cols(); }
};

struct IntegratorStats {
    long newton_iterations = 0;
    long steps = 0;
};

/// Implicit Euler for the smoothed equation dz/dt = A_{lambda,eps}(R l - Q z).
/// Each step is solved by a damped Newton iteration to residual
/// 1e-11 (1 + |z_k|).
Trajectory integrate_smoothed(const ProblemData& pd, const RegParams& p, const Trajectory& load,
                              IntegratorStats* stats = nullptr);

/// Implicit Euler for the Yosida-regularized equation dz/dt = A_lambda(R l - Q z)
/// (semismooth Newton on the projection kink).
Trajectory integrate_yosida(const ProblemData& pd, double lambda, const Trajectory& load,
                            IntegratorStats* stats = nullptr);

/// Time-incremental scheme for the unregularized inclusion, via the
/// transformed equation dq/dt + Q A(q) ni R dl/dt in q = R l - Q z.
/// Requires R l(0) - Q z0 in D(A).
Trajectory integrate_reference(const ProblemData& pd, const Trajectory& load,
                               IntegratorStats* stats = nullptr);

/// CSV with one `# schema=v1` comment line, a `t,comp_0,...` header and one
/// row per node at full double precision.
void write_trajectory_csv(const std::string& path, const Trajectory& tr);
Trajectory read_trajectory_csv(const std::string& path);

} // namespace monoflow
