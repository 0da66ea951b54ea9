#include "monoflow/control.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "monoflow/log.hpp"
#include "monoflow/rng.hpp"

namespace monoflow {

void RegSchedule::validate(double T, double q_norm) const {
    if (stages.empty()) throw Error("RegSchedule: empty schedule");
    double prev_lambda = std::numeric_limits<double>::infinity();
    double prev_theta = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < stages.size(); ++i) {
        const RegStage& st = stages[i];
        if (!(st.lambda > 0.0) || !(st.epsilon > 0.0))
            throw Error("RegSchedule: stage " + std::to_string(i) + " has nonpositive parameters");
        if (!(st.lambda < prev_lambda))
            throw Error("RegSchedule: lambda must be strictly decreasing");
        if (!(st.theta > 0.0) || st.theta > 1.0 || !(st.theta < prev_theta))
            throw Error("RegSchedule: theta must be in (0,1] and strictly decreasing");
        const double bound = st.theta * st.lambda * st.lambda * std::exp(-T * q_norm / st.lambda);
        if (st.epsilon > bound * (1.0 + 1e-12))
            throw Error("RegSchedule: stage " + std::to_string(i) + " violates the coupling, " +
                        std::to_string(st.epsilon) + " > " + std::to_string(bound));
        prev_lambda = st.lambda;
        prev_theta = st.theta;
    }
}

RegSchedule RegSchedule::geometric(double T, double q_norm, int n_stages, double lambda0,
                                   double theta0) {
    if (n_stages < 1) throw Error("RegSchedule: need at least one stage");
    RegSchedule s;
    double lambda = lambda0, theta = theta0;
    for (int n = 0; n < n_stages; ++n) {
        const double eps = theta * lambda * lambda * std::exp(-T * q_norm / lambda);
        if (!(eps > 0.0))
            throw Error("RegSchedule: coupling underflows at stage " + std::to_string(n));
        s.stages.push_back({lambda, eps, theta});
        lambda *= 0.5;
        theta *= 0.5;
    }
    s.validate(T, q_norm);
    return s;
}

void write_schedule_json(const std::string& path, const RegSchedule& schedule) {
    nlohmann::json j;
    j["schema"] = "monoflow-schedule-v1";
    nlohmann::json stages = nlohmann::json::array();
    for (const RegStage& st : schedule.stages)
        stages.push_back({{"lambda", st.lambda}, {"epsilon", st.epsilon}, {"theta", st.theta}});
    j["stages"] = std::move(stages);
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

RegSchedule read_schedule_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open schedule file " + path);
    nlohmann::json j;
    try {
        in >> j;
        if (j.at("schema").get<std::string>() != "monoflow-schedule-v1")
            throw ConfigError("schedule file " + path + ": unknown schema");
        RegSchedule s;
        for (const auto& st : j.at("stages"))
            s.stages.push_back({st.at("lambda").get<double>(), st.at("epsilon").get<double>(),
                                st.at("theta").get<double>()});
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("schedule file " + path + ": " + e.what());
    }
}

double evaluate_objective(const ProblemData& pd, const RegParams& p, const Trajectory& load,
                          const EndTimeObjective& objective) {
    if (load[0].norm() != 0.0)
        throw Error("evaluate_objective: admissible controls satisfy l(0) = 0");
    const Trajectory z = integrate_smoothed(pd, p, load);
    return objective.value(z, load);
}

Trajectory riesz_h1(const Trajectory& gradient, double gamma) {
    if (!(gamma > 0.0)) throw Error("riesz_h1: gamma must be positive");
    if (gradient[0].norm() != 0.0) throw Error("riesz_h1: node-0 component must vanish");
    const Index N = gradient.grid().N;
    const double tau = gradient.grid().tau();
    const Index p = gradient.dim();

    // Stiffness of the discrete -d^2/dt^2 with a Dirichlet condition at 0
    // (node eliminated) and a Neumann condition at T, scaled by gamma / tau.
    std::vector<double> sub(static_cast<size_t>(N - 1), -1.0);
    std::vector<double> sup(static_cast<size_t>(N - 1), -1.0);
    std::vector<double> diag(static_cast<size_t>(N), 2.0);
    diag.back() = 1.0;

    Trajectory delta(gradient.grid(), p);
    Vec rhs(N);
    for (Index j = 0; j < p; ++j) {
        for (Index k = 1; k <= N; ++k) rhs[k - 1] = gradient[k][j] * tau / gamma;
        const Vec x = solve_tridiagonal(sub, diag, sup, rhs);
        for (Index k = 1; k <= N; ++k) delta[k][j] = x[k - 1];
    }
    return delta;
}

namespace {

double euclidean_pairing(const Trajectory& a, const Trajectory& b) {
    double acc = 0.0;
    for (Index k = 0; k < a.nodes(); ++k) acc += a[k].dot(b[k]);
    return acc;
}

Trajectory axpy(const Trajectory& base, double s, const Trajectory& dir) {
    Trajectory out = base;
    for (Index k = 0; k < out.nodes(); ++k) out[k] += s * dir[k];
    return out;
}

} // namespace

OptimizeReport optimize(const ProblemData& pd, const RegParams& p, const Trajectory& l_init,
                        const EndTimeObjective& objective, const OptimizeOptions& opts) {
    if (l_init[0].norm() != 0.0) throw Error("optimize: initial control must vanish at t = 0");
    const double gamma = objective.spec().gamma;

    OptimizeReport report{.control = l_init};
    Trajectory l = l_init;
    double f = evaluate_objective(pd, p, l, objective);
    report.objective_values.push_back(f);
    report.step_sizes.push_back(0.0);

    for (int it = 0; it < opts.max_iterations; ++it) {
        const Trajectory g = reduced_gradient(pd, p, l, objective);
        const Trajectory delta = riesz_h1(g, gamma);
        const double grad_norm_sq = euclidean_pairing(g, delta);
        const double grad_norm = std::sqrt(std::max(0.0, grad_norm_sq));
        report.gradient_norms.push_back(grad_norm);
        if (grad_norm <= opts.tol) {
            report.converged = true;
            report.iterations = it;
            report.control = std::move(l);
            return report;
        }

        const Trajectory& dir = opts.h1_preconditioning ? delta : g;
        const double slope = -euclidean_pairing(g, dir); // directional derivative along -dir
        double step = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opts.max_halvings; ++h) {
            const Trajectory l_trial = axpy(l, -step, dir);
            const double f_trial = evaluate_objective(pd, p, l_trial, objective);
            if (f_trial <= f + opts.armijo_c1 * step * slope) {
                l = l_trial;
                f = f_trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) throw LineSearchFailed(opts.max_halvings);
        report.objective_values.push_back(f);
        report.step_sizes.push_back(step);
        log_debug("optimize iter ", it, ": F = ", f, ", |grad|_H1 = ", grad_norm,
                  ", step = ", step);
    }
    // Iteration cap reached: record the final gradient norm for the report.
    {
        const Trajectory g = reduced_gradient(pd, p, l, objective);
        const Trajectory delta = riesz_h1(g, gamma);
        const double gn = std::sqrt(std::max(0.0, euclidean_pairing(g, delta)));
        report.gradient_norms.push_back(gn);
        report.converged = gn <= opts.tol;
    }
    report.iterations = opts.max_iterations;
    report.control = std::move(l);
    return report;
}

ContinuationReport continuation(const ProblemData& pd, const RegSchedule& schedule,
                                const Trajectory& l_init, const EndTimeObjective& objective,
                                const OptimizeOptions& opts) {
    schedule.validate(l_init.grid().T, pd.Q.op_norm());
    ContinuationReport out;
    Trajectory l = l_init;
    for (size_t n = 0; n < schedule.stages.size(); ++n) {
        const RegStage& st = schedule.stages[n];
        const RegParams p(st.lambda, st.epsilon);
        log_info("continuation stage ", n, ": lambda = ", st.lambda, ", epsilon = ", st.epsilon);
        OptimizeReport rep = optimize(pd, p, l, objective, opts);
        const Trajectory prev = std::move(l);
        l = rep.control;
        out.stage_objectives.push_back(rep.objective_values.back());
        if (n > 0) {
            Trajectory diff = l;
            for (Index k = 0; k < diff.nodes(); ++k) diff[k] -= prev[k];
            out.iterate_distances_h1.push_back(h1norm(diff));
            out.objective_gaps.push_back(
                std::abs(out.stage_objectives[n] - out.stage_objectives[n - 1]));
        }
        out.stage_reports.push_back(std::move(rep));
    }
    return out;
}

SscReport ssc_verify(const ProblemData& pd, const RegParams& p, const Trajectory& load,
                     const EndTimeObjective& objective, int n_dirs, double delta_target,
                     std::uint64_t seed) {
    if (n_dirs < 1) throw Error("ssc_verify: need at least one direction");
    Rng rng(seed);
    const Index N = load.grid().N;

    auto random_direction = [&]() {
        Trajectory h(load.grid(), load.dim());
        for (Index k = 1; k <= N; ++k) h[k] = rng.normal_vector(load.dim());
        const double norm = h1norm(h);
        for (Index k = 0; k <= N; ++k) h[k] /= norm;
        return h;
    };

    SscReport report;
    report.delta_target = delta_target;
    report.min_quotient = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_dirs; ++i) {
        const Trajectory h = random_direction();
        const double q = hessian_quadratic_form(pd, p, load, objective, h);
        report.quotients.push_back(q);
        report.min_quotient = std::min(report.min_quotient, q);
    }
    report.pass = report.min_quotient >= delta_target;

    if (report.pass) {
        // Locate a radius with verified quadratic growth on fresh samples.
        const double f0 = evaluate_objective(pd, p, load, objective);
        double t0 = 1.0;
        const int n_growth_dirs = 5;
        std::vector<Trajectory> dirs;
        for (int i = 0; i < n_growth_dirs; ++i) dirs.push_back(random_direction());
        auto growth_holds = [&](double t) {
            for (const Trajectory& h : dirs) {
                const double f_t = evaluate_objective(pd, p, axpy(load, t, h), objective);
                if (f_t < f0 + 0.25 * delta_target * t * t - 1e-14 * (1.0 + std::abs(f0)))
                    return false;
            }
            return true;
        };
        int halvings = 0;
        while (!growth_holds(t0) && halvings < 40) {
            t0 *= 0.5;
            ++halvings;
        }
        report.growth_t0 = halvings < 40 ? t0 : 0.0;
    }
    return report;
}

void write_report_csv(const std::string& path, const OptimizeReport& report) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << "# schema=v1\n";
    out << "iter,F,grad_norm,step\n";
    char buf[40];
    for (size_t i = 0; i < report.objective_values.size(); ++i) {
        out << i;
        std::snprintf(buf, sizeof buf, "%.17g", report.objective_values[i]);
        out << ',' << buf;
        if (i < report.gradient_norms.size()) {
            std::snprintf(buf, sizeof buf, "%.17g", report.gradient_norms[i]);
            out << ',' << buf;
        } else {
            out << ',';
        }
        std::snprintf(buf, sizeof buf, "%.17g", i < report.step_sizes.size() ? report.step_sizes[i] : 0.0);
        out << ',' << buf << "\n";
    }
}

} // namespace monoflow
