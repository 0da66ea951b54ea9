#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "monoflow/control.hpp"

namespace py = pybind11;
using namespace monoflow;

namespace {

Trajectory trajectory_from_array(const TimeGrid& grid, const Mat& values) {
    if (values.rows() != grid.N + 1)
        throw DimensionMismatch("Trajectory: rows", values.rows(), grid.N + 1);
    std::vector<Vec> nodes;
    nodes.reserve(static_cast<size_t>(values.rows()));
    for (Index k = 0; k < values.rows(); ++k) nodes.push_back(values.row(k).transpose());
    return Trajectory(grid, std::move(nodes));
}

Mat trajectory_to_array(const Trajectory& tr) {
    Mat out(tr.nodes(), tr.dim());
    for (Index k = 0; k < tr.nodes(); ++k) out.row(k) = tr[k].transpose();
    return out;
}

} // namespace

PYBIND11_MODULE(_monoflow, m) {
    m.doc() = "Evolution inclusions with Yosida regularization, adjoint-based optimal "
              "control, and the homogenized-plasticity instantiation";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<Error>(m, "SolverError", PyExc_RuntimeError);

    // linalg
    py::class_<SymPosDefMap>(m, "SymPosDefMap")
        .def(py::init<Mat>(), py::arg("matrix"))
        .def_property_readonly("matrix", &SymPosDefMap::matrix)
        .def("apply", &SymPosDefMap::apply)
        .def("solve", py::overload_cast<const Vec&>(&SymPosDefMap::solve, py::const_))
        .def_property_readonly("min_eig", &SymPosDefMap::min_eig)
        .def_property_readonly("op_norm", &SymPosDefMap::op_norm);
    m.def("solve_spd", &solve_spd);
    m.def("min_eig_estimate", &min_eig_estimate);
    m.def(
        "solve_tridiagonal",
        [](const std::vector<double>& sub, const std::vector<double>& diag,
           const std::vector<double>& sup, const Vec& rhs) {
            return solve_tridiagonal(sub, diag, sup, rhs);
        },
        py::arg("sub"), py::arg("diag"), py::arg("sup"), py::arg("rhs"));

    // flow rule
    py::class_<RegParams>(m, "RegParams")
        .def(py::init<double, double>(), py::arg("lambda_"), py::arg("epsilon"))
        .def_readonly("lambda_", &RegParams::lambda)
        .def_readonly("epsilon", &RegParams::epsilon);

    py::class_<FlowRule> rule(m, "FlowRule");
    rule.def_static("von_mises", &FlowRule::von_mises, py::arg("sigma0"), py::arg("d"),
                    py::arg("n_pts"))
        .def_static("box", &FlowRule::box, py::arg("lo"), py::arg("hi"))
        .def_static("linear", &FlowRule::linear, py::arg("kappa"))
        .def_property_readonly("dim", &FlowRule::dim);
    m.def("resolvent", &resolvent);
    m.def("yosida", &yosida);
    m.def("minimal_section", &minimal_section);
    m.def("domain_distance", &domain_distance);
    m.def("smoothed_max", &smoothed_max);
    m.def("smoothed_max_d1", &smoothed_max_d1);
    m.def("smoothed_max_d2", &smoothed_max_d2);
    m.def("smoothed_eval", &smoothed_eval);
    m.def("smoothed_jvp", &smoothed_jvp);
    m.def("smoothed_hvp", &smoothed_hvp);
    m.def("deviator", &deviator);

    // evolution
    py::class_<TimeGrid>(m, "TimeGrid")
        .def(py::init<double, Index>(), py::arg("T"), py::arg("N"))
        .def_readonly("T", &TimeGrid::T)
        .def_readonly("N", &TimeGrid::N)
        .def_property_readonly("tau", &TimeGrid::tau)
        .def("node", &TimeGrid::node);

    py::class_<Trajectory>(m, "Trajectory")
        .def(py::init(&trajectory_from_array), py::arg("grid"), py::arg("values"))
        .def_static("constant", &Trajectory::constant)
        .def_static(
            "from_function",
            [](const TimeGrid& grid, const std::function<Vec(double)>& f) {
                return Trajectory::from_function(grid, f);
            })
        .def_property_readonly("grid", &Trajectory::grid)
        .def_property_readonly("dim", &Trajectory::dim)
        .def_property_readonly("values", &trajectory_to_array)
        .def("interpolate", &Trajectory::interpolate)
        .def("refined", &Trajectory::refined)
        .def("restricted", &Trajectory::restricted);

    m.def("cnorm", &cnorm);
    m.def("l2norm", &l2norm);
    m.def("h1seminorm", &h1seminorm);
    m.def("h1norm", &h1norm);
    m.def("cnorm_diff", &cnorm_diff);
    m.def("write_trajectory_csv", &write_trajectory_csv);
    m.def("read_trajectory_csv", &read_trajectory_csv);

    py::class_<ProblemData>(m, "ProblemData")
        .def(py::init<SymPosDefMap, Mat, Vec, FlowRule, double>(), py::arg("Q"), py::arg("R"),
             py::arg("z0"), py::arg("rule"), py::arg("gamma_q") = -1.0)
        .def_readonly("gamma_q", &ProblemData::gamma_q)
        .def_property_readonly("state_dim", &ProblemData::state_dim)
        .def_property_readonly("control_dim", &ProblemData::control_dim);

    m.def(
        "integrate_smoothed",
        [](const ProblemData& pd, const RegParams& p, const Trajectory& load) {
            return integrate_smoothed(pd, p, load);
        },
        py::arg("pd"), py::arg("p"), py::arg("load"));
    m.def(
        "integrate_yosida",
        [](const ProblemData& pd, double lambda, const Trajectory& load) {
            return integrate_yosida(pd, lambda, load);
        },
        py::arg("pd"), py::arg("lambda_"), py::arg("load"));
    m.def(
        "integrate_reference",
        [](const ProblemData& pd, const Trajectory& load) {
            return integrate_reference(pd, load);
        },
        py::arg("pd"), py::arg("load"));

    // homogenized model
    py::class_<ToySizes>(m, "ToySizes")
        .def(py::init<>())
        .def_readwrite("d", &ToySizes::d)
        .def_readwrite("n_pts", &ToySizes::n_pts)
        .def_readwrite("n_displacement", &ToySizes::n_displacement)
        .def_readwrite("n_macro", &ToySizes::n_macro)
        .def_readwrite("m_internal", &ToySizes::m_internal)
        .def_readwrite("p_loads", &ToySizes::p_loads);

    py::class_<PlasticityData>(m, "PlasticityData")
        .def(py::init<Mat, SymPosDefMap, Mat, SymPosDefMap, Mat, Mat, int, int, Index, double,
                      double, std::uint64_t>(),
             py::arg("E"), py::arg("C"), py::arg("B"), py::arg("Bh"), py::arg("P"),
             py::arg("avg"), py::arg("d"), py::arg("n_pts"), py::arg("n_macro"),
             py::arg("c_floor"), py::arg("b_floor"), py::arg("seed") = 0)
        .def_readonly("E", &PlasticityData::E)
        .def_readonly("B", &PlasticityData::B)
        .def_readonly("P", &PlasticityData::P)
        .def_readonly("avg", &PlasticityData::avg)
        .def_readonly("d", &PlasticityData::d)
        .def_readonly("n_pts", &PlasticityData::n_pts)
        .def_readonly("n_macro", &PlasticityData::n_macro)
        .def_property_readonly("C", [](const PlasticityData& p) { return p.C.matrix(); })
        .def_property_readonly("Bh", [](const PlasticityData& p) { return p.Bh.matrix(); })
        .def_property_readonly("n_internal", &PlasticityData::n_internal)
        .def_property_readonly("n_loads", &PlasticityData::n_loads);

    py::class_<AssembledOperators>(m, "AssembledOperators")
        .def_property_readonly("Q", [](const AssembledOperators& o) { return o.Q.matrix(); })
        .def_readonly("R", &AssembledOperators::R)
        .def_readonly("T", &AssembledOperators::T)
        .def_property_readonly("Q_map", [](const AssembledOperators& o) { return o.Q; });

    py::class_<RecoveredState>(m, "RecoveredState")
        .def_readonly("u", &RecoveredState::u)
        .def_readonly("v", &RecoveredState::v)
        .def_readonly("sigma", &RecoveredState::sigma)
        .def_readonly("w", &RecoveredState::w);

    m.def("assemble", &assemble);
    m.def("recover_state", &recover_state);
    m.def("make_toy_instance", &make_toy_instance, py::arg("seed"), py::arg("sizes"),
          py::arg("c_floor"), py::arg("b_floor"));
    m.def("write_instance_json", &write_instance_json);
    m.def("read_instance_json", &read_instance_json);

    // objective, sensitivity, control
    py::class_<ObjectiveSpec>(m, "ObjectiveSpec")
        .def(py::init<>())
        .def_readwrite("alpha", &ObjectiveSpec::alpha)
        .def_readwrite("beta", &ObjectiveSpec::beta)
        .def_readwrite("gamma", &ObjectiveSpec::gamma)
        .def_readwrite("u_target", &ObjectiveSpec::u_target)
        .def_readwrite("sigma_target", &ObjectiveSpec::sigma_target);

    py::class_<EndTimeObjective>(m, "EndTimeObjective")
        .def(py::init<ObjectiveSpec, const AssembledOperators&, const PlasticityData&>(),
             py::arg("spec"), py::arg("ops"), py::arg("data"))
        .def(py::init<ObjectiveSpec, Index, Index>(), py::arg("spec"), py::arg("state_dim"),
             py::arg("control_dim"))
        .def("value", &EndTimeObjective::value)
        .def("terminal", &EndTimeObjective::terminal);

    py::class_<LinearizedState>(m, "LinearizedState")
        .def_readonly("eta", &LinearizedState::eta)
        .def_readonly("direction", &LinearizedState::direction);
    py::class_<AdjointState>(m, "AdjointState")
        .def_readonly("phi", &AdjointState::phi)
        .def_readonly("terminal", &AdjointState::terminal);

    m.def("solve_linearized", &solve_linearized);
    m.def("solve_second_order", &solve_second_order);
    m.def("solve_adjoint", &solve_adjoint);
    m.def("reduced_gradient", &reduced_gradient);
    m.def("hessian_quadratic_form", &hessian_quadratic_form);

    py::class_<RegStage>(m, "RegStage")
        .def(py::init<double, double, double>(), py::arg("lambda_"), py::arg("epsilon"),
             py::arg("theta"))
        .def_readonly("lambda_", &RegStage::lambda)
        .def_readonly("epsilon", &RegStage::epsilon)
        .def_readonly("theta", &RegStage::theta);

    py::class_<RegSchedule>(m, "RegSchedule")
        .def(py::init<>())
        .def_readwrite("stages", &RegSchedule::stages)
        .def("validate", &RegSchedule::validate)
        .def_static("geometric", &RegSchedule::geometric, py::arg("T"), py::arg("q_norm"),
                    py::arg("n_stages") = 5, py::arg("lambda0") = 0.5, py::arg("theta0") = 0.5);

    py::class_<OptimizeOptions>(m, "OptimizeOptions")
        .def(py::init<>())
        .def_readwrite("tol", &OptimizeOptions::tol)
        .def_readwrite("max_iterations", &OptimizeOptions::max_iterations)
        .def_readwrite("armijo_c1", &OptimizeOptions::armijo_c1)
        .def_readwrite("max_halvings", &OptimizeOptions::max_halvings)
        .def_readwrite("h1_preconditioning", &OptimizeOptions::h1_preconditioning);

    py::class_<OptimizeReport>(m, "OptimizeReport")
        .def_readonly("objective_values", &OptimizeReport::objective_values)
        .def_readonly("gradient_norms", &OptimizeReport::gradient_norms)
        .def_readonly("step_sizes", &OptimizeReport::step_sizes)
        .def_readonly("control", &OptimizeReport::control)
        .def_readonly("converged", &OptimizeReport::converged)
        .def_readonly("iterations", &OptimizeReport::iterations);

    py::class_<ContinuationReport>(m, "ContinuationReport")
        .def_readonly("stage_reports", &ContinuationReport::stage_reports)
        .def_readonly("stage_objectives", &ContinuationReport::stage_objectives)
        .def_readonly("iterate_distances_h1", &ContinuationReport::iterate_distances_h1)
        .def_readonly("objective_gaps", &ContinuationReport::objective_gaps);

    py::class_<SscReport>(m, "SscReport")
        .def_readonly("min_quotient", &SscReport::min_quotient)
        .def_readonly("pass_", &SscReport::pass)
        .def_readonly("delta_target", &SscReport::delta_target)
        .def_readonly("growth_t0", &SscReport::growth_t0)
        .def_readonly("quotients", &SscReport::quotients);

    m.def("evaluate_objective", &evaluate_objective);
    m.def("riesz_h1", &riesz_h1);
    m.def("optimize", &optimize, py::arg("pd"), py::arg("p"), py::arg("l_init"),
          py::arg("objective"), py::arg("opts") = OptimizeOptions{});
    m.def("continuation", &continuation, py::arg("pd"), py::arg("schedule"), py::arg("l_init"),
          py::arg("objective"), py::arg("opts") = OptimizeOptions{});
    m.def("ssc_verify", &ssc_verify, py::arg("pd"), py::arg("p"), py::arg("load"),
          py::arg("objective"), py::arg("n_dirs"), py::arg("delta_target"),
          py::arg("seed") = 2024);
    m.def("write_report_csv", &write_report_csv);
    m.def("write_schedule_json", &write_schedule_json);
    m.def("read_schedule_json", &read_schedule_json);
}
