#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "monoflow/control.hpp"
#include "monoflow/log.hpp"
#include "monoflow/rng.hpp"

namespace mf = monoflow;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitCheckFailed = 4;

struct RunSetup {
    json config;
    std::filesystem::path out_dir;
    std::filesystem::path config_dir;
    std::uint64_t seed = 0;
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

mf::Vec vec_from_json(const json& j) {
    mf::Vec v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v[static_cast<mf::Index>(i)] = j.at(i).get<double>();
    return v;
}

json require(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) throw mf::ConfigError(where + ": missing field '" + key + "'");
    return j.at(key);
}

RunSetup load_setup(const std::string& config_path, const std::string& out_override,
                    std::optional<std::uint64_t> seed_override) {
    std::ifstream in(config_path);
    if (!in) throw mf::ConfigError("cannot open config file " + config_path);
    RunSetup setup;
    try {
        in >> setup.config;
    } catch (const json::exception& e) {
        throw mf::ConfigError("config " + config_path + ": " + e.what());
    }
    if (setup.config.value("schema", "") != "monoflow-config-v1")
        throw mf::ConfigError("config " + config_path + ": schema must be monoflow-config-v1");
    setup.config_dir = std::filesystem::path(config_path).parent_path();
    std::string out = out_override.empty() ? setup.config.value("out", "out") : out_override;
    setup.out_dir = out;
    setup.seed = seed_override ? *seed_override : setup.config.value("seed", std::uint64_t{0});
    std::filesystem::create_directories(setup.out_dir);
    return setup;
}

std::filesystem::path resolve(const RunSetup& setup, const std::string& path) {
    std::filesystem::path p(path);
    if (p.is_absolute()) return p;
    return setup.config_dir / p;
}

mf::PlasticityData load_instance(const RunSetup& setup) {
    const json inst = require(setup.config, "instance", "config");
    const std::string type = require(inst, "type", "instance").get<std::string>();
    if (type == "file") {
        const std::string path = require(inst, "path", "instance").get<std::string>();
        const auto full = resolve(setup, path);
        if (!std::filesystem::exists(full))
            throw mf::ConfigError("instance file not found: " + full.string());
        return mf::read_instance_json(full.string());
    }
    if (type == "toy") {
        const json sizes_j = require(inst, "sizes", "instance");
        mf::ToySizes sizes;
        sizes.d = require(sizes_j, "d", "sizes").get<int>();
        sizes.n_pts = require(sizes_j, "n_pts", "sizes").get<int>();
        sizes.n_displacement = require(sizes_j, "n", "sizes").get<mf::Index>();
        sizes.n_macro = require(sizes_j, "n_macro", "sizes").get<mf::Index>();
        sizes.m_internal = require(sizes_j, "m", "sizes").get<mf::Index>();
        sizes.p_loads = require(sizes_j, "p", "sizes").get<mf::Index>();
        const json floors = require(inst, "floors", "instance");
        const auto seed = inst.value("seed", std::uint64_t{42});
        return mf::make_toy_instance(seed, sizes, require(floors, "c", "floors").get<double>(),
                                     require(floors, "b", "floors").get<double>());
    }
    throw mf::ConfigError("instance: unknown type '" + type + "'");
}

mf::FlowRule load_rule(const json& config, const mf::PlasticityData& data) {
    const json rule_j = require(config, "rule", "config");
    const std::string kind = require(rule_j, "kind", "rule").get<std::string>();
    if (kind == "vonmises") {
        if (data.n_internal() != data.n_strain())
            throw mf::ConfigError("rule vonmises requires the identity layout m = n_pts*d*d");
        return mf::FlowRule::von_mises(require(rule_j, "sigma0", "rule").get<double>(), data.d,
                                       data.n_pts);
    }
    if (kind == "box")
        return mf::FlowRule::box(vec_from_json(require(rule_j, "lo", "rule")),
                                 vec_from_json(require(rule_j, "hi", "rule")));
    if (kind == "linear")
        return mf::FlowRule::linear(require(rule_j, "kappa", "rule").get<double>());
    throw mf::ConfigError("rule: unknown kind '" + kind + "'");
}

mf::TimeGrid load_grid(const json& config) {
    const json grid = require(config, "grid", "config");
    return mf::TimeGrid(require(grid, "T", "grid").get<double>(),
                        require(grid, "N", "grid").get<mf::Index>());
}

mf::Trajectory load_load(const RunSetup& setup, const mf::TimeGrid& grid, mf::Index p) {
    const json load_j = require(setup.config, "load", "config");
    const std::string type = require(load_j, "type", "load").get<std::string>();
    if (type == "csv") {
        const auto path = resolve(setup, require(load_j, "path", "load").get<std::string>());
        if (!std::filesystem::exists(path))
            throw mf::ConfigError("load file not found: " + path.string());
        mf::Trajectory tr = mf::read_trajectory_csv(path.string());
        if (tr.dim() != p) throw mf::ConfigError("load csv has wrong control dimension");
        if (!(tr.grid() == grid)) throw mf::ConfigError("load csv grid differs from config grid");
        return tr;
    }
    const mf::Vec a = vec_from_json(require(load_j, "amplitude", "load"));
    if (a.size() != p)
        throw mf::ConfigError("load amplitude has dimension " + std::to_string(a.size()) +
                              ", expected " + std::to_string(p));
    if (type == "ramp")
        return mf::Trajectory::from_function(grid,
                                             [&](double t) { return mf::Vec((t / grid.T) * a); });
    if (type == "sine") {
        const double periods = load_j.value("periods", 1.0);
        return mf::Trajectory::from_function(grid, [&](double t) {
            return mf::Vec(std::sin(M_PI * periods * t / grid.T) * a);
        });
    }
    throw mf::ConfigError("load: unknown type '" + type + "'");
}

struct Problem {
    mf::PlasticityData data;
    mf::AssembledOperators ops;
    mf::ProblemData pd;
    mf::TimeGrid grid;
    mf::Trajectory load;
    mf::EndTimeObjective objective;
};

mf::EndTimeObjective load_objective(const json& config, const mf::AssembledOperators& ops,
                                    const mf::PlasticityData& data) {
    mf::ObjectiveSpec spec;
    if (config.contains("objective")) {
        const json obj = config.at("objective");
        spec.alpha = obj.value("alpha", 0.0);
        spec.beta = obj.value("beta", 0.0);
        spec.gamma = obj.value("gamma", 1.0);
        if (obj.contains("u_target")) spec.u_target = vec_from_json(obj.at("u_target"));
        if (obj.contains("sigma_target")) spec.sigma_target = vec_from_json(obj.at("sigma_target"));
    }
    return mf::EndTimeObjective(spec, ops, data);
}

Problem build_problem(const RunSetup& setup) {
    mf::PlasticityData data = load_instance(setup);
    mf::AssembledOperators ops = mf::assemble(data);
    mf::FlowRule rule = load_rule(setup.config, data);
    mf::Vec z0 = mf::Vec::Zero(data.n_internal());
    if (setup.config.contains("z0")) z0 = vec_from_json(setup.config.at("z0"));
    mf::TimeGrid grid = load_grid(setup.config);
    mf::Trajectory load = load_load(setup, grid, data.n_loads());
    mf::EndTimeObjective objective = load_objective(setup.config, ops, data);
    mf::ProblemData pd(ops.Q, ops.R, std::move(z0), std::move(rule));
    return Problem{std::move(data), std::move(ops), std::move(pd), grid, std::move(load),
                   std::move(objective)};
}

mf::RegParams load_reg(const json& config) {
    const json reg = require(config, "reg", "config");
    return mf::RegParams(require(reg, "lambda", "reg").get<double>(),
                         require(reg, "epsilon", "reg").get<double>());
}

mf::RegSchedule load_schedule(const RunSetup& setup, const Problem& prob) {
    const json sched = require(setup.config, "schedule", "config");
    const std::string type = require(sched, "type", "schedule").get<std::string>();
    if (type == "geometric")
        return mf::RegSchedule::geometric(prob.grid.T, prob.pd.Q.op_norm(),
                                          sched.value("stages", 5), sched.value("lambda0", 0.5),
                                          sched.value("theta0", 0.5));
    if (type == "file") {
        const auto path = resolve(setup, require(sched, "path", "schedule").get<std::string>());
        if (!std::filesystem::exists(path))
            throw mf::ConfigError("schedule file not found: " + path.string());
        return mf::read_schedule_json(path.string());
    }
    if (type == "explicit") {
        mf::RegSchedule s;
        for (const auto& st : require(sched, "stages", "schedule"))
            s.stages.push_back({st.at("lambda").get<double>(), st.at("epsilon").get<double>(),
                                st.at("theta").get<double>()});
        return s;
    }
    throw mf::ConfigError("schedule: unknown type '" + type + "'");
}

mf::OptimizeOptions load_optimize_options(const json& config) {
    mf::OptimizeOptions opts;
    if (config.contains("optimize")) {
        const json o = config.at("optimize");
        opts.tol = o.value("tol", opts.tol);
        opts.max_iterations = o.value("max_iterations", opts.max_iterations);
        opts.h1_preconditioning = o.value("h1_preconditioning", true);
    }
    return opts;
}

int cmd_forward(const RunSetup& setup) {
    Problem prob = build_problem(setup);
    const std::string solver =
        setup.config.value("solver", std::string("smoothed"));
    mf::IntegratorStats stats;
    mf::Trajectory z = [&] {
        if (solver == "smoothed")
            return mf::integrate_smoothed(prob.pd, load_reg(setup.config), prob.load, &stats);
        if (solver == "yosida") {
            const json reg = require(setup.config, "reg", "config");
            return mf::integrate_yosida(prob.pd, require(reg, "lambda", "reg").get<double>(),
                                        prob.load, &stats);
        }
        if (solver == "reference") return mf::integrate_reference(prob.pd, prob.load, &stats);
        throw mf::ConfigError("solver: unknown variant '" + solver + "'");
    }();

    mf::write_trajectory_csv((setup.out_dir / "state.csv").string(), z);
    std::ofstream diag(setup.out_dir / "diagnostics.csv");
    diag << "# schema=v1\n";
    diag << "cnorm,l2norm,h1seminorm,newton_iterations,steps\n";
    diag << fmt(mf::cnorm(z)) << ',' << fmt(mf::l2norm(z)) << ',' << fmt(mf::h1seminorm(z)) << ','
         << stats.newton_iterations << ',' << stats.steps << "\n";
    std::cout << "forward: wrote " << (setup.out_dir / "state.csv").string() << "\n";
    return kExitOk;
}

int cmd_yosida_sweep(const RunSetup& setup, const std::vector<double>& lambda_override) {
    Problem prob = build_problem(setup);
    std::vector<double> lambdas = lambda_override;
    if (lambdas.empty() && setup.config.contains("lambdas"))
        for (const auto& v : setup.config.at("lambdas")) lambdas.push_back(v.get<double>());
    if (lambdas.empty()) lambdas = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};

    const int refine = 8;
    mf::Trajectory fine_load = prob.load.refined(refine);
    mf::Trajectory z_ref_fine = mf::integrate_reference(prob.pd, fine_load);
    mf::Trajectory z_ref = z_ref_fine.restricted(prob.grid.N);
    const double dz_ref_l2 = mf::h1seminorm(z_ref_fine);

    std::ofstream out(setup.out_dir / "sweep.csv");
    out << "# schema=v1\n";
    out << "lambda,C_error,bound,ratio,observed_order\n";
    bool ok = true;
    double prev_err = 0.0, prev_lambda = 0.0;
    for (size_t i = 0; i < lambdas.size(); ++i) {
        const double lambda = lambdas[i];
        mf::Trajectory z_l = mf::integrate_yosida(prob.pd, lambda, prob.load);
        const double err = mf::cnorm_diff(z_l, z_ref);
        const double bound = std::sqrt(lambda / prob.pd.gamma_q) * dz_ref_l2;
        const double ratio = bound > 0.0 ? err / bound : 0.0;
        double order = std::numeric_limits<double>::quiet_NaN();
        if (i > 0 && err > 0.0 && prev_err > 0.0)
            order = std::log(prev_err / err) / std::log(prev_lambda / lambda);
        out << fmt(lambda) << ',' << fmt(err) << ',' << fmt(bound) << ',' << fmt(ratio) << ','
            << fmt(order) << "\n";
        if (ratio > 1.15) ok = false;
        prev_err = err;
        prev_lambda = lambda;
    }
    std::cout << "yosida-sweep: " << (ok ? "all ratios within bound" : "bound violated") << "\n";
    return ok ? kExitOk : kExitCheckFailed;
}

int cmd_check_gradient(const RunSetup& setup) {
    Problem prob = build_problem(setup);
    const mf::RegParams reg = load_reg(setup.config);
    const mf::Trajectory g = mf::reduced_gradient(prob.pd, reg, prob.load, prob.objective);

    mf::Rng rng(setup.seed + 17);
    const double t = 1e-5;
    const int n_dirs = 20;
    double max_err = 0.0;
    std::ofstream out(setup.out_dir / "gradient_check.csv");
    out << "# schema=v1\n";
    out << "direction,fd,adjoint,err\n";
    for (int i = 0; i < n_dirs; ++i) {
        mf::Trajectory h(prob.grid, prob.load.dim());
        for (mf::Index k = 1; k <= prob.grid.N; ++k) h[k] = rng.normal_vector(prob.load.dim());
        mf::Trajectory lp = prob.load, lm = prob.load;
        for (mf::Index k = 0; k <= prob.grid.N; ++k) {
            lp[k] += t * h[k];
            lm[k] -= t * h[k];
        }
        const double fp = mf::evaluate_objective(prob.pd, reg, lp, prob.objective);
        const double fm = mf::evaluate_objective(prob.pd, reg, lm, prob.objective);
        const double fd = (fp - fm) / (2.0 * t);
        double gh = 0.0;
        for (mf::Index k = 0; k <= prob.grid.N; ++k) gh += g[k].dot(h[k]);
        const double err = std::abs(fd - gh) / (1.0 + std::abs(gh));
        max_err = std::max(max_err, err);
        out << i << ',' << fmt(fd) << ',' << fmt(gh) << ',' << fmt(err) << "\n";
    }
    const bool ok = max_err <= 1e-6;
    std::cout << "check-gradient: max relative error " << fmt(max_err) << " -> "
              << (ok ? "pass" : "fail") << "\n";
    return ok ? kExitOk : kExitCheckFailed;
}

int cmd_check_ssc(const RunSetup& setup) {
    Problem prob = build_problem(setup);
    const mf::RegParams reg = load_reg(setup.config);
    int n_dirs = 20;
    double delta_target = 1e-6;
    if (setup.config.contains("ssc")) {
        n_dirs = setup.config.at("ssc").value("n_dirs", n_dirs);
        delta_target = setup.config.at("ssc").value("delta_target", delta_target);
    }
    const mf::SscReport rep =
        mf::ssc_verify(prob.pd, reg, prob.load, prob.objective, n_dirs, delta_target, setup.seed);
    std::ofstream out(setup.out_dir / "ssc.csv");
    out << "# schema=v1\n";
    out << "direction,quotient\n";
    for (size_t i = 0; i < rep.quotients.size(); ++i)
        out << i << ',' << fmt(rep.quotients[i]) << "\n";
    std::cout << "check-ssc: min quotient " << fmt(rep.min_quotient) << " vs target "
              << fmt(delta_target) << " -> " << (rep.pass ? "pass" : "fail");
    if (rep.pass) std::cout << ", growth radius t0 = " << fmt(rep.growth_t0);
    std::cout << "\n";
    return rep.pass ? kExitOk : kExitCheckFailed;
}

int cmd_optimize(const RunSetup& setup) {
    Problem prob = build_problem(setup);
    const mf::RegParams reg = load_reg(setup.config);
    const mf::OptimizeReport rep =
        mf::optimize(prob.pd, reg, prob.load, prob.objective, load_optimize_options(setup.config));
    mf::write_report_csv((setup.out_dir / "optimize_report.csv").string(), rep);
    mf::write_trajectory_csv((setup.out_dir / "control_final.csv").string(), rep.control);
    std::cout << "optimize: " << (rep.converged ? "converged" : "iteration cap") << ", F = "
              << fmt(rep.objective_values.back()) << ", |grad| = "
              << fmt(rep.gradient_norms.back()) << "\n";
    return kExitOk;
}

int cmd_continuation(const RunSetup& setup) {
    Problem prob = build_problem(setup);
    const mf::RegSchedule schedule = load_schedule(setup, prob);
    const mf::ContinuationReport rep = mf::continuation(prob.pd, schedule, prob.load,
                                                        prob.objective,
                                                        load_optimize_options(setup.config));
    std::ofstream out(setup.out_dir / "continuation.csv");
    out << "# schema=v1\n";
    out << "stage,lambda,epsilon,F,iterations,converged,iterate_distance_h1,objective_gap\n";
    for (size_t n = 0; n < rep.stage_reports.size(); ++n) {
        out << n << ',' << fmt(schedule.stages[n].lambda) << ',' << fmt(schedule.stages[n].epsilon)
            << ',' << fmt(rep.stage_objectives[n]) << ',' << rep.stage_reports[n].iterations << ','
            << (rep.stage_reports[n].converged ? 1 : 0) << ',';
        out << (n > 0 ? fmt(rep.iterate_distances_h1[n - 1]) : "nan") << ',';
        out << (n > 0 ? fmt(rep.objective_gaps[n - 1]) : "nan") << "\n";
        mf::write_report_csv(
            (setup.out_dir / ("stage_" + std::to_string(n) + "_report.csv")).string(),
            rep.stage_reports[n]);
    }
    mf::write_trajectory_csv((setup.out_dir / "control_final.csv").string(),
                             rep.stage_reports.back().control);
    std::cout << "continuation: " << rep.stage_reports.size() << " stages, final F = "
              << fmt(rep.stage_objectives.back()) << "\n";
    return kExitOk;
}

int cmd_make_instance(const RunSetup& setup) {
    mf::PlasticityData data = load_instance(setup);
    const auto path = setup.out_dir / "instance.json";
    mf::write_instance_json(path.string(), data);
    std::cout << "make-instance: wrote " << path.string() << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"monoflow: evolution inclusions with Yosida regularization and "
                 "adjoint-based optimal control"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::string lambda_list;

    app.add_option("--config", config_path, "Path to a monoflow-config-v1 JSON file")
        ->required();
    app.add_option("--out", out_dir, "Output directory (overrides the config)");
    app.add_option("--seed", seed, "Seed override");
    app.add_option("--lambda", lambda_list, "Comma-separated lambda list (yosida-sweep)");

    auto* sub_forward = app.add_subcommand("forward", "Integrate the state equation");
    auto* sub_sweep = app.add_subcommand("yosida-sweep", "Error table over a lambda sweep");
    auto* sub_opt = app.add_subcommand("optimize", "Reduced gradient descent");
    auto* sub_grad = app.add_subcommand("check-gradient", "Adjoint gradient vs finite differences");
    auto* sub_ssc = app.add_subcommand("check-ssc", "Sampled second-order condition");
    auto* sub_cont = app.add_subcommand("continuation", "Optimize along a (lambda, epsilon) schedule");
    auto* sub_make = app.add_subcommand("make-instance", "Generate and write a toy instance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Map CLI parse errors onto the config exit code, keep --help at 0.
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        RunSetup setup = load_setup(config_path, out_dir, seed);
        std::vector<double> lambdas;
        if (!lambda_list.empty()) {
            std::stringstream ss(lambda_list);
            std::string item;
            while (std::getline(ss, item, ',')) lambdas.push_back(std::stod(item));
        }
        if (sub_forward->parsed()) return cmd_forward(setup);
        if (sub_sweep->parsed()) return cmd_yosida_sweep(setup, lambdas);
        if (sub_opt->parsed()) return cmd_optimize(setup);
        if (sub_grad->parsed()) return cmd_check_gradient(setup);
        if (sub_ssc->parsed()) return cmd_check_ssc(setup);
        if (sub_cont->parsed()) return cmd_continuation(setup);
        if (sub_make->parsed()) return cmd_make_instance(setup);
        std::cerr << "no subcommand given\n";
        return kExitConfig;
    } catch (const mf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const mf::Error& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSolver;
    }
}
