#include "monoflow/evolution.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "monoflow/log.hpp"

namespace monoflow {

TimeGrid::TimeGrid(double T_, Index N_) : T(T_), N(N_) {
    if (!(T > 0.0) || !std::isfinite(T)) throw Error("TimeGrid: final time must be positive");
    if (N < 1) throw Error("TimeGrid: need at least one step");
}

Trajectory::Trajectory(TimeGrid grid, Index space_dim)
    : grid_(grid), space_dim_(space_dim),
      values_(static_cast<size_t>(grid.N + 1), Vec::Zero(space_dim)) {
    if (space_dim < 1) throw Error("Trajectory: space dimension must be positive");
}

Trajectory::Trajectory(TimeGrid grid, std::vector<Vec> values)
    : grid_(grid), space_dim_(values.empty() ? 0 : values.front().size()),
      values_(std::move(values)) {
    if (static_cast<Index>(values_.size()) != grid_.N + 1)
        throw DimensionMismatch("Trajectory", static_cast<long>(values_.size()),
                                static_cast<long>(grid_.N + 1));
    for (const Vec& v : values_) {
        if (v.size() != space_dim_)
            throw DimensionMismatch("Trajectory node", v.size(), space_dim_);
        if (!v.allFinite()) throw Error("Trajectory: non-finite node value");
    }
}

Trajectory Trajectory::constant(TimeGrid grid, const Vec& value) {
    Trajectory tr(grid, value.size());
    for (Index k = 0; k <= grid.N; ++k) tr[k] = value;
    return tr;
}

Trajectory Trajectory::from_function(TimeGrid grid, const std::function<Vec(double)>& f) {
    std::vector<Vec> vals;
    vals.reserve(static_cast<size_t>(grid.N + 1));
    for (Index k = 0; k <= grid.N; ++k) vals.push_back(f(grid.node(k)));
    return Trajectory(grid, std::move(vals));
}

Vec Trajectory::interpolate(double t) const {
    if (t <= 0.0) return values_.front();
    if (t >= grid_.T) return values_.back();
    const double s = t / grid_.tau();
    const Index k = std::min<Index>(static_cast<Index>(s), grid_.N - 1);
    const double w = s - static_cast<double>(k);
    return (1.0 - w) * values_[static_cast<size_t>(k)] + w * values_[static_cast<size_t>(k + 1)];
}

Trajectory Trajectory::refined(int factor) const {
    if (factor < 1) throw Error("Trajectory::refined: factor must be >= 1");
    TimeGrid fine(grid_.T, grid_.N * factor);
    Trajectory out(fine, space_dim_);
    for (Index k = 0; k <= fine.N; ++k) {
        const Index c = k / factor;
        const double w = static_cast<double>(k - c * factor) / factor;
        out[k] = w == 0.0 ? values_[static_cast<size_t>(c)]
                          : Vec((1.0 - w) * values_[static_cast<size_t>(c)] +
                                w * values_[static_cast<size_t>(c + 1)]);
    }
    return out;
}

Trajectory Trajectory::restricted(Index coarse_N) const {
    if (coarse_N < 1 || grid_.N % coarse_N != 0)
        throw Error("Trajectory::restricted: step counts are not nested");
    const Index factor = grid_.N / coarse_N;
    Trajectory out(TimeGrid(grid_.T, coarse_N), space_dim_);
    for (Index k = 0; k <= coarse_N; ++k) out[k] = values_[static_cast<size_t>(k * factor)];
    return out;
}

double cnorm(const Trajectory& tr) {
    double m = 0.0;
    for (Index k = 0; k < tr.nodes(); ++k) m = std::max(m, tr[k].norm());
    return m;
}

double l2norm(const Trajectory& tr) {
    const double tau = tr.grid().tau();
    double acc = 0.0;
    for (Index k = 0; k < tr.grid().N; ++k)
        acc += 0.5 * tau * (tr[k].squaredNorm() + tr[k + 1].squaredNorm());
    return std::sqrt(acc);
}

double h1seminorm(const Trajectory& tr) {
    const double tau = tr.grid().tau();
    double acc = 0.0;
    for (Index k = 0; k < tr.grid().N; ++k) acc += (tr[k + 1] - tr[k]).squaredNorm() / tau;
    return std::sqrt(acc);
}

double h1norm(const Trajectory& tr) {
    const double a = l2norm(tr), b = h1seminorm(tr);
    return std::sqrt(a * a + b * b);
}

double cnorm_diff(const Trajectory& a, const Trajectory& b) {
    if (a.nodes() != b.nodes()) throw DimensionMismatch("cnorm_diff", b.nodes(), a.nodes());
    double m = 0.0;
    for (Index k = 0; k < a.nodes(); ++k) m = std::max(m, (a[k] - b[k]).norm());
    return m;
}

ProblemData::ProblemData(SymPosDefMap Q_, Mat R_, Vec z0_, FlowRule rule_, double gamma_q_)
    : Q(std::move(Q_)), R(std::move(R_)), z0(std::move(z0_)), rule(std::move(rule_)),
      gamma_q(gamma_q_) {
    if (R.rows() != Q.dim()) throw DimensionMismatch("ProblemData: R rows", R.rows(), Q.dim());
    if (z0.size() != Q.dim()) throw DimensionMismatch("ProblemData: z0", z0.size(), Q.dim());
    rule.check_dim(Q.dim());
    if (gamma_q < 0.0) {
        gamma_q = Q.min_eig();
    } else if (gamma_q > Q.min_eig() * (1.0 + 1e-8)) {
        throw Error("ProblemData: gamma_q " + std::to_string(gamma_q) +
                    " exceeds the smallest eigenvalue estimate " + std::to_string(Q.min_eig()));
    }
}

namespace {

/// Damped Newton for one implicit Euler step
///   z = z_prev + tau * op(R l - Q z),
/// with `jac` an element of the generalized Jacobian of `op`.
Vec implicit_step(const ProblemData& pd, double tau, const Vec& z_prev, const Vec& rl,
                  const std::function<Vec(const Vec&)>& op,
                  const std::function<Mat(const Vec&)>& jac, Index step_index,
                  IntegratorStats* stats) {
    const double tol = 1e-11 * (1.0 + z_prev.norm());
    Vec z = z_prev;
    Vec y = rl - pd.Q.matrix() * z;
    Vec residual = z - z_prev - tau * op(y);
    for (int it = 0; it < 50; ++it) {
        if (residual.norm() <= tol) {
            if (stats) stats->newton_iterations += it;
            return z;
        }
        const Mat J = Mat::Identity(z.size(), z.size()) + tau * (jac(y) * pd.Q.matrix());
        const Vec dz = J.partialPivLu().solve(-residual);
        double damping = 1.0;
        bool accepted = false;
        for (int h = 0; h < 50; ++h) {
            Vec z_trial = z + damping * dz;
            Vec y_trial = rl - pd.Q.matrix() * z_trial;
            Vec res_trial = z_trial - z_prev - tau * op(y_trial);
            if (res_trial.norm() < residual.norm() || res_trial.norm() <= tol) {
                z = std::move(z_trial);
                y = std::move(y_trial);
                residual = std::move(res_trial);
                accepted = true;
                break;
            }
            damping *= 0.5;
        }
        if (!accepted) throw NewtonDiverged(step_index, residual.norm());
    }
    if (residual.norm() <= tol) return z;
    throw NewtonDiverged(step_index, residual.norm());
}

Trajectory integrate_implicit(const ProblemData& pd, const Trajectory& load,
                              const std::function<Vec(const Vec&)>& op,
                              const std::function<Mat(const Vec&)>& jac,
                              IntegratorStats* stats) {
    if (load.dim() != pd.control_dim())
        throw DimensionMismatch("integrate: load", load.dim(), pd.control_dim());
    const TimeGrid& grid = load.grid();
    const double tau = grid.tau();
    Trajectory z(grid, pd.state_dim());
    z[0] = pd.z0;
    for (Index k = 0; k < grid.N; ++k) {
        const Vec rl = pd.R * load[k + 1];
        z[k + 1] = implicit_step(pd, tau, z[k], rl, op, jac, k, stats);
        if (stats) stats->steps += 1;
    }
    return z;
}

} // namespace

Trajectory integrate_smoothed(const ProblemData& pd, const RegParams& p, const Trajectory& load,
                              IntegratorStats* stats) {
    auto op = [&](const Vec& y) { return smoothed_eval(pd.rule, y, p); };
    auto jac = [&](const Vec& y) { return smoothed_jacobian(pd.rule, y, p); };
    return integrate_implicit(pd, load, op, jac, stats);
}

Trajectory integrate_yosida(const ProblemData& pd, double lambda, const Trajectory& load,
                            IntegratorStats* stats) {
    if (!(lambda > 0.0)) throw Error("integrate_yosida: lambda must be positive");
    auto op = [&](const Vec& y) { return yosida(pd.rule, y, lambda); };
    auto jac = [&](const Vec& y) { return yosida_jacobian(pd.rule, y, lambda); };
    return integrate_implicit(pd, load, op, jac, stats);
}

Trajectory integrate_reference(const ProblemData& pd, const Trajectory& load,
                               IntegratorStats* stats) {
    if (load.dim() != pd.control_dim())
        throw DimensionMismatch("integrate_reference: load", load.dim(), pd.control_dim());
    const TimeGrid& grid = load.grid();
    const double tau = grid.tau();

    Vec q = pd.R * load[0] - pd.Q.matrix() * pd.z0;
    {
        const double dist = domain_distance(pd.rule, q);
        if (dist > 1e-9 * (1.0 + q.norm())) throw IncompatibleInitialState(dist);
    }

    // Incremental problem per step: q_{k+1} + tau Q v = b, v in A(q_{k+1}),
    // solved as the fixed point q = R^A_{tau kappa}(q + kappa Q^{-1}(b - q)).
    const double kappa = pd.gamma_q;
    const double mu = tau * kappa;
    const Index n = q.size();
    const Mat q_inv = pd.Q.solve(Mat::Identity(n, n));
    const Mat inner = Mat::Identity(n, n) - kappa * q_inv;

    Trajectory z(grid, pd.state_dim());
    z[0] = pd.z0;
    for (Index k = 0; k < grid.N; ++k) {
        const Vec b = q + pd.R * (load[k + 1] - load[k]);
        const double tol = 1e-11 * (1.0 + b.norm());

        auto fixed_point_map = [&](const Vec& qq) {
            return resolvent(pd.rule, Vec(qq + kappa * (q_inv * (b - qq))), mu);
        };

        Vec residual = q - fixed_point_map(q);
        bool converged = residual.norm() <= tol;
        // Semismooth Newton on q - R_mu(q + kappa Q^{-1}(b - q)) = 0.
        for (int it = 0; it < 50 && !converged; ++it) {
            const Vec u = q + kappa * (q_inv * (b - q));
            const Mat proj_jac = Mat::Identity(n, n) - mu * yosida_jacobian(pd.rule, u, mu);
            const Mat J = Mat::Identity(n, n) - proj_jac * inner;
            const Vec dq = J.partialPivLu().solve(-residual);
            double damping = 1.0;
            bool accepted = false;
            for (int h = 0; h < 50; ++h) {
                Vec q_trial = q + damping * dq;
                Vec res_trial = q_trial - fixed_point_map(q_trial);
                if (res_trial.norm() < residual.norm() || res_trial.norm() <= tol) {
                    q = std::move(q_trial);
                    residual = std::move(res_trial);
                    accepted = true;
                    break;
                }
                damping *= 0.5;
            }
            if (stats) stats->newton_iterations += 1;
            if (!accepted) break;
            converged = residual.norm() <= tol;
        }
        if (!converged) {
            // Fallback: plain fixed-point iteration (a contraction with
            // factor 1 - kappa / |Q|).
            log_debug("reference step ", k, ": falling back to fixed-point iteration");
            const long cap = 200000;
            for (long it = 0; it < cap && !converged; ++it) {
                Vec q_next = fixed_point_map(q);
                residual = q - q_next;
                q = std::move(q_next);
                converged = residual.norm() <= tol;
            }
            if (!converged) throw SubproblemDiverged(k, residual.norm());
        }
        z[k + 1] = pd.Q.solve(Vec(pd.R * load[k + 1] - q));
        if (stats) stats->steps += 1;
    }
    return z;
}

void write_trajectory_csv(const std::string& path, const Trajectory& tr) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << "# schema=v1\n";
    out << "t";
    for (Index j = 0; j < tr.dim(); ++j) out << ",comp_" << j;
    out << "\n";
    char buf[40];
    for (Index k = 0; k < tr.nodes(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", tr.grid().node(k));
        out << buf;
        for (Index j = 0; j < tr.dim(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", tr[k][j]);
            out << ',' << buf;
        }
        out << "\n";
    }
}

Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::string line;
    std::vector<double> times;
    std::vector<Vec> values;
    Index dim = -1;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("t,", 0) == 0) continue; // header
        std::stringstream ss(line);
        std::string field;
        std::vector<double> row;
        while (std::getline(ss, field, ',')) row.push_back(std::stod(field));
        if (row.size() < 2) throw Error("trajectory csv: malformed row in " + path);
        if (dim < 0) dim = static_cast<Index>(row.size()) - 1;
        if (static_cast<Index>(row.size()) - 1 != dim)
            throw Error("trajectory csv: inconsistent row width in " + path);
        times.push_back(row[0]);
        values.push_back(Eigen::Map<Vec>(row.data() + 1, dim));
    }
    if (values.size() < 2) throw Error("trajectory csv: need at least two nodes in " + path);
    TimeGrid grid(times.back(), static_cast<Index>(values.size()) - 1);
    return Trajectory(grid, std::move(values));
}

} // namespace monoflow
