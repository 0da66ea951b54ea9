#include "monoflow/objective.hpp"

namespace monoflow {

void ObjectiveSpec::validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw Error("ObjectiveSpec: gamma must be positive");
    if (alpha < 0.0 || beta < 0.0 || !std::isfinite(alpha) || !std::isfinite(beta))
        throw Error("ObjectiveSpec: tracking weights must be finite and nonnegative");
}

EndTimeObjective::EndTimeObjective(ObjectiveSpec spec, const AssembledOperators& ops,
                                   const PlasticityData& data)
    : spec_(std::move(spec)), state_dim_(data.n_internal()), control_dim_(data.n_loads()) {
    spec_.validate();
    if (!ops.G) throw Error("EndTimeObjective: instance has no elastic coupling");
    has_tracking_ = spec_.alpha > 0.0 || spec_.beta > 0.0;

    // w(T) = G^{-1}(E^T C B z(T) + P l(T)); u(T) its macro head;
    // avg Sigma(T) = avg C (E w(T) - B z(T)).
    const Mat w_of_z = ops.G->solve(Mat(data.E.transpose() * data.C.matrix() * data.B));
    const Mat w_of_l = ops.G->solve(data.P);
    u_of_z_ = w_of_z.topRows(data.n_macro);
    u_of_l_ = w_of_l.topRows(data.n_macro);
    const Mat avg_c = data.avg * data.C.matrix();
    sigma_of_z_ = avg_c * (data.E * w_of_z - data.B);
    sigma_of_l_ = avg_c * data.E * w_of_l;

    if (spec_.u_target.size() == 0) spec_.u_target = Vec::Zero(data.n_macro);
    if (spec_.sigma_target.size() == 0) spec_.sigma_target = Vec::Zero(data.avg.rows());
    if (spec_.alpha > 0.0 && spec_.u_target.size() != data.n_macro)
        throw DimensionMismatch("ObjectiveSpec: u_target", spec_.u_target.size(), data.n_macro);
    if (spec_.beta > 0.0 && spec_.sigma_target.size() != data.avg.rows())
        throw DimensionMismatch("ObjectiveSpec: sigma_target", spec_.sigma_target.size(),
                                data.avg.rows());
}

EndTimeObjective::EndTimeObjective(ObjectiveSpec spec, Index state_dim, Index control_dim)
    : spec_(std::move(spec)), state_dim_(state_dim), control_dim_(control_dim) {
    spec_.validate();
    if (spec_.alpha > 0.0 || spec_.beta > 0.0)
        throw Error("EndTimeObjective: tracking weights require an assembled instance");
}

double EndTimeObjective::terminal(const Vec& z_end, const Vec& l_end) const {
    if (!has_tracking_) return 0.0;
    double v = 0.0;
    if (spec_.alpha > 0.0)
        v += 0.5 * spec_.alpha * (u_of_z_ * z_end + u_of_l_ * l_end - spec_.u_target).squaredNorm();
    if (spec_.beta > 0.0)
        v += 0.5 * spec_.beta *
             (sigma_of_z_ * z_end + sigma_of_l_ * l_end - spec_.sigma_target).squaredNorm();
    return v;
}

Vec EndTimeObjective::terminal_grad_z(const Vec& z_end, const Vec& l_end) const {
    Vec g = Vec::Zero(state_dim_);
    if (!has_tracking_) return g;
    if (spec_.alpha > 0.0)
        g += spec_.alpha *
             (u_of_z_.transpose() * (u_of_z_ * z_end + u_of_l_ * l_end - spec_.u_target));
    if (spec_.beta > 0.0)
        g += spec_.beta * (sigma_of_z_.transpose() *
                           (sigma_of_z_ * z_end + sigma_of_l_ * l_end - spec_.sigma_target));
    return g;
}

Vec EndTimeObjective::terminal_grad_l(const Vec& z_end, const Vec& l_end) const {
    Vec g = Vec::Zero(control_dim_);
    if (!has_tracking_) return g;
    if (spec_.alpha > 0.0)
        g += spec_.alpha *
             (u_of_l_.transpose() * (u_of_z_ * z_end + u_of_l_ * l_end - spec_.u_target));
    if (spec_.beta > 0.0)
        g += spec_.beta * (sigma_of_l_.transpose() *
                           (sigma_of_z_ * z_end + sigma_of_l_ * l_end - spec_.sigma_target));
    return g;
}

double EndTimeObjective::terminal_hessian_form(const Vec& eta_end, const Vec& h_end) const {
    if (!has_tracking_) return 0.0;
    double v = 0.0;
    if (spec_.alpha > 0.0)
        v += spec_.alpha * (u_of_z_ * eta_end + u_of_l_ * h_end).squaredNorm();
    if (spec_.beta > 0.0)
        v += spec_.beta * (sigma_of_z_ * eta_end + sigma_of_l_ * h_end).squaredNorm();
    return v;
}

double EndTimeObjective::value(const Trajectory& z, const Trajectory& load) const {
    if (z.dim() != state_dim_) throw DimensionMismatch("objective: state", z.dim(), state_dim_);
    if (load.dim() != control_dim_)
        throw DimensionMismatch("objective: control", load.dim(), control_dim_);
    const double semi = h1seminorm(load);
    return terminal(z[z.nodes() - 1], load[load.nodes() - 1]) + 0.5 * spec_.gamma * semi * semi;
}

} // namespace monoflow
