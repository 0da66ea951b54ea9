#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "monoflow/sensitivity.hpp"

namespace monoflow {

/// One continuation stage (lambda_n, epsilon_n) with its admissibility
/// factor theta_n: epsilon_n <= theta_n lambda_n^2 exp(-T |Q| / lambda_n).
struct RegStage {
    double lambda;
    double epsilon;
    double theta;
};

/// Decreasing schedule of regularization parameters obeying the exponential
/// coupling of the smoothing width to the Yosida parameter.
struct RegSchedule {
    std::vector<RegStage> stages;

    /// Verifies lambda decreasing, theta <= 1 strictly decreasing, and the
    /// coupling bound for the given final time and operator norm of Q.
    void validate(double T, double q_norm) const;

    /// lambda_n = lambda0 / 2^n, theta_n = theta0 / 2^n,
    /// epsilon_n = theta_n lambda_n^2 exp(-T |Q| / lambda_n).
    static RegSchedule geometric(double T, double q_norm, int n_stages = 5,
                                 double lambda0 = 0.5, double theta0 = 0.5);
};

void write_schedule_json(const std::string& path, const RegSchedule& schedule);
RegSchedule read_schedule_json(const std::string& path);

struct OptimizeOptions {
    double tol = 1e-8;       // stop when the H1 gradient norm drops below
    int max_iterations = 500;
    double armijo_c1 = 1e-4;
    int max_halvings = 20;
    bool h1_preconditioning = true;
};

struct OptimizeReport {
    std::vector<double> objective_values; // accepted iterates, starting value first
    std::vector<double> gradient_norms;   // H1 dual norms, same indexing
    std::vector<double> step_sizes;       // accepted step lengths (0 for the start)
    Trajectory control;                   // final iterate
    bool converged = false;
    int iterations = 0;
};

struct ContinuationReport {
    std::vector<OptimizeReport> stage_reports;
    std::vector<double> stage_objectives;      // final F per stage
    std::vector<double> iterate_distances_h1;  // |l_{n+1} - l_n|_{H1}, size stages-1
    std::vector<double> objective_gaps;        // |F_{n+1} - F_n|, size stages-1
};

struct SscReport {
    double min_quotient = 0.0;      // min of F'' h^2 over H1-normalized directions
    bool pass = false;              // min_quotient >= delta_target
    double delta_target = 0.0;
    double growth_t0 = 0.0;         // step radius with verified quadratic growth
    std::vector<double> quotients;  // all sampled values
};

/// Forward solve followed by the objective value.
double evaluate_objective(const ProblemData& pd, const RegParams& p, const Trajectory& load,
                          const EndTimeObjective& objective);

/// H1 Riesz representer of a Euclidean gradient: the direction delta with
/// delta_0 = 0 and gamma <d delta/dt, d h/dt> = <g, h> for all h with
/// h_0 = 0, obtained from a tridiagonal two-point boundary value problem
/// (Neumann condition at T).
Trajectory riesz_h1(const Trajectory& gradient, double gamma);

/// Preconditioned gradient descent with Armijo backtracking.
OptimizeReport optimize(const ProblemData& pd, const RegParams& p, const Trajectory& l_init,
                        const EndTimeObjective& objective, const OptimizeOptions& opts = {});

/// Optimizes along the schedule, warm-starting each stage from the previous
/// minimizer.
ContinuationReport continuation(const ProblemData& pd, const RegSchedule& schedule,
                                const Trajectory& l_init, const EndTimeObjective& objective,
                                const OptimizeOptions& opts = {});

/// Samples the reduced Hessian quadratic form in random H1-normalized
/// directions with h_0 = 0. When the sampled minimum clears delta_target,
/// a growth radius t0 is located by bisection on the quadratic growth
/// inequality F(l + t h) >= F(l) + delta/4 t^2 |h|^2_{H1}.
SscReport ssc_verify(const ProblemData& pd, const RegParams& p, const Trajectory& load,
                     const EndTimeObjective& objective, int n_dirs, double delta_target,
                     std::uint64_t seed = 2024);

/// CSV with rows `iter,F,grad_norm,step`.
void write_report_csv(const std::string& path, const OptimizeReport& report);

} // namespace monoflow
