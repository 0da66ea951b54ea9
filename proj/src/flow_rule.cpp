#include "monoflow/flow_rule.hpp"

#include <cmath>

namespace monoflow {

RegParams::RegParams(double lambda_, double epsilon_) : lambda(lambda_), epsilon(epsilon_) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw Error("RegParams: lambda must be positive, got " + std::to_string(lambda));
    if (!(epsilon > 0.0) || epsilon > 0.5)
        throw Error("RegParams: epsilon must lie in (0, 1/2], got " + std::to_string(epsilon));
}

FlowRule FlowRule::von_mises(double sigma0, int d, int n_pts) {
    if (!(sigma0 > 0.0)) throw Error("FlowRule: yield stress must be positive");
    if (d != 2 && d != 3) throw Error("FlowRule: spatial dimension must be 2 or 3");
    if (n_pts < 1) throw Error("FlowRule: need at least one material point");
    FlowRule r;
    r.kind_ = Kind::VonMises;
    r.sigma0_ = sigma0;
    r.d_ = d;
    r.n_pts_ = n_pts;
    return r;
}

FlowRule FlowRule::box(Vec lo, Vec hi) {
    if (lo.size() != hi.size()) throw DimensionMismatch("FlowRule::box", hi.size(), lo.size());
    if (lo.size() == 0) throw Error("FlowRule: empty box");
    if (((hi - lo).array() < 0.0).any()) throw Error("FlowRule: box requires lo <= hi");
    FlowRule r;
    r.kind_ = Kind::Box;
    r.lo_ = std::move(lo);
    r.hi_ = std::move(hi);
    return r;
}

FlowRule FlowRule::linear(double kappa) {
    if (kappa < 0.0) throw Error("FlowRule: linear scale must be nonnegative");
    FlowRule r;
    r.kind_ = Kind::Linear;
    r.kappa_ = kappa;
    return r;
}

Index FlowRule::dim() const {
    switch (kind_) {
    case Kind::VonMises: return static_cast<Index>(n_pts_) * d_ * d_;
    case Kind::Box: return lo_.size();
    case Kind::Linear: return -1;
    }
    return -1;
}

void FlowRule::check_dim(Index n) const {
    const Index want = dim();
    if (want >= 0 && n != want) throw DimensionMismatch("FlowRule", n, want);
}

double block_trace(const Vec& block, int d) {
    double tr = 0.0;
    for (int i = 0; i < d; ++i) tr += block[i * d + i];
    return tr;
}

Vec deviator(const Vec& block, int d) {
    if (block.size() != static_cast<Index>(d) * d)
        throw DimensionMismatch("deviator", block.size(), static_cast<Index>(d) * d);
    Vec dev = block;
    const double mean = block_trace(block, d) / d;
    for (int i = 0; i < d; ++i) dev[i * d + i] -= mean;
    return dev;
}

namespace {

void check_block_symmetry(const Vec& tau, int d, int n_pts) {
    const int b = d * d;
    for (int p = 0; p < n_pts; ++p) {
        double asym = 0.0, scale = 0.0;
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                const double a = tau[p * b + i * d + j];
                const double bt = tau[p * b + j * d + i];
                asym += (a - bt) * (a - bt);
                scale += a * a;
            }
        }
        if (std::sqrt(asym) > 1e-12 * std::max(1.0, std::sqrt(scale)))
            throw Error("FlowRule: block " + std::to_string(p) + " is not symmetric");
    }
}

struct BlockView {
    Vec dev; // deviator of the block
};

BlockView block_view(const Vec& v, int p, int d) {
    const int b = d * d;
    Vec dev = v.segment(p * b, b);
    double mean = 0.0;
    for (int i = 0; i < d; ++i) mean += dev[i * d + i];
    mean /= d;
    for (int i = 0; i < d; ++i) dev[i * d + i] -= mean;
    return {std::move(dev)};
}

/// Projector onto deviators of flattened d x d blocks.
Mat deviator_projector(int d) {
    const int b = d * d;
    Mat D = Mat::Identity(b, b);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) D(i * d + i, j * d + j) -= 1.0 / d;
    return D;
}

} // namespace

Vec resolvent(const FlowRule& rule, const Vec& h, double lambda) {
    if (!(lambda > 0.0)) throw Error("resolvent: lambda must be positive");
    rule.check_dim(h.size());
    switch (rule.kind()) {
    case FlowRule::Kind::Linear:
        return h / (1.0 + lambda * rule.kappa());
    case FlowRule::Kind::Box:
        return h.cwiseMax(rule.lo()).cwiseMin(rule.hi());
    case FlowRule::Kind::VonMises: {
        const int d = rule.spatial_dim();
        check_block_symmetry(h, d, rule.n_pts());
        Vec out = h;
        const int b = d * d;
        for (int p = 0; p < rule.n_pts(); ++p) {
            auto blk = block_view(h, p, d);
            const double r = blk.dev.norm();
            if (r > rule.sigma0()) {
                const double f = 1.0 - rule.sigma0() / r;
                out.segment(p * b, b) -= f * blk.dev;
            }
        }
        return out;
    }
    }
    throw Error("resolvent: unknown rule");
}

Vec yosida(const FlowRule& rule, const Vec& h, double lambda) {
    return (h - resolvent(rule, h, lambda)) / lambda;
}

double domain_distance(const FlowRule& rule, const Vec& h) {
    rule.check_dim(h.size());
    switch (rule.kind()) {
    case FlowRule::Kind::Linear:
        return 0.0;
    case FlowRule::Kind::Box:
        return (h - h.cwiseMax(rule.lo()).cwiseMin(rule.hi())).norm();
    case FlowRule::Kind::VonMises: {
        double sq = 0.0;
        for (int p = 0; p < rule.n_pts(); ++p) {
            auto blk = block_view(h, p, rule.spatial_dim());
            const double excess = blk.dev.norm() - rule.sigma0();
            if (excess > 0.0) sq += excess * excess;
        }
        return std::sqrt(sq);
    }
    }
    throw Error("domain_distance: unknown rule");
}

Vec minimal_section(const FlowRule& rule, const Vec& h) {
    rule.check_dim(h.size());
    if (rule.kind() == FlowRule::Kind::Linear) return rule.kappa() * h;
    const double dist = domain_distance(rule, h);
    if (dist > 1e-10) throw OutsideDomain(dist);
    return Vec::Zero(h.size());
}

double smoothed_max(double r, double eps) {
    if (!(eps > 0.0) || eps > 0.5) throw Error("smoothed_max: eps must lie in (0, 1/2]");
    if (r >= eps) return r;
    if (r <= -eps) return 0.0;
    const double s = r + eps;
    return s * s * s * (3.0 * eps - r) / (16.0 * eps * eps * eps);
}

double smoothed_max_d1(double r, double eps) {
    if (!(eps > 0.0) || eps > 0.5) throw Error("smoothed_max: eps must lie in (0, 1/2]");
    if (r >= eps) return 1.0;
    if (r <= -eps) return 0.0;
    const double s = r + eps;
    return s * s * (2.0 * eps - r) / (4.0 * eps * eps * eps);
}

double smoothed_max_d2(double r, double eps) {
    if (!(eps > 0.0) || eps > 0.5) throw Error("smoothed_max: eps must lie in (0, 1/2]");
    if (r >= eps || r <= -eps) return 0.0;
    return 3.0 * (r + eps) * (eps - r) / (4.0 * eps * eps * eps);
}

Vec smoothed_eval(const FlowRule& rule, const Vec& tau, const RegParams& p) {
    rule.check_dim(tau.size());
    switch (rule.kind()) {
    case FlowRule::Kind::Linear:
        return yosida(rule, tau, p.lambda);
    case FlowRule::Kind::Box: {
        Vec out(tau.size());
        for (Index i = 0; i < tau.size(); ++i)
            out[i] = (smoothed_max(tau[i] - rule.hi()[i], p.epsilon) -
                      smoothed_max(rule.lo()[i] - tau[i], p.epsilon)) /
                     p.lambda;
        return out;
    }
    case FlowRule::Kind::VonMises: {
        const int d = rule.spatial_dim();
        check_block_symmetry(tau, d, rule.n_pts());
        const int b = d * d;
        Vec out = Vec::Zero(tau.size());
        for (int pt = 0; pt < rule.n_pts(); ++pt) {
            auto blk = block_view(tau, pt, d);
            const double r = blk.dev.norm();
            if (r == 0.0) continue; // max{0, 1 - sigma0/r} := 0 at r = 0
            const double g = smoothed_max(1.0 - rule.sigma0() / r, p.epsilon);
            out.segment(pt * b, b) = (g / p.lambda) * blk.dev;
        }
        return out;
    }
    }
    throw Error("smoothed_eval: unknown rule");
}

Vec smoothed_jvp(const FlowRule& rule, const Vec& tau, const Vec& h, const RegParams& p) {
    rule.check_dim(tau.size());
    if (h.size() != tau.size()) throw DimensionMismatch("smoothed_jvp", h.size(), tau.size());
    switch (rule.kind()) {
    case FlowRule::Kind::Linear:
        return (rule.kappa() / (1.0 + p.lambda * rule.kappa())) * h;
    case FlowRule::Kind::Box: {
        Vec out(tau.size());
        for (Index i = 0; i < tau.size(); ++i)
            out[i] = (smoothed_max_d1(tau[i] - rule.hi()[i], p.epsilon) +
                      smoothed_max_d1(rule.lo()[i] - tau[i], p.epsilon)) *
                     h[i] / p.lambda;
        return out;
    }
    case FlowRule::Kind::VonMises: {
        const int d = rule.spatial_dim();
        check_block_symmetry(tau, d, rule.n_pts());
        const int b = d * d;
        const double s0 = rule.sigma0();
        Vec out = Vec::Zero(tau.size());
        for (int pt = 0; pt < rule.n_pts(); ++pt) {
            auto blk = block_view(tau, pt, d);
            const double r = blk.dev.norm();
            if (r == 0.0) continue;
            const double arg = 1.0 - s0 / r;
            const double m0 = smoothed_max(arg, p.epsilon);
            const double m1 = smoothed_max_d1(arg, p.epsilon);
            Vec hdev = deviator(h.segment(pt * b, b), d);
            const double inner = blk.dev.dot(hdev);
            out.segment(pt * b, b) =
                (m1 * s0 / (r * r * r) * inner / p.lambda) * blk.dev + (m0 / p.lambda) * hdev;
        }
        return out;
    }
    }
    throw Error("smoothed_jvp: unknown rule");
}

Vec smoothed_hvp(const FlowRule& rule, const Vec& tau, const Vec& h1, const Vec& h2,
                 const RegParams& p) {
    rule.check_dim(tau.size());
    if (h1.size() != tau.size()) throw DimensionMismatch("smoothed_hvp", h1.size(), tau.size());
    if (h2.size() != tau.size()) throw DimensionMismatch("smoothed_hvp", h2.size(), tau.size());
    switch (rule.kind()) {
    case FlowRule::Kind::Linear:
        return Vec::Zero(tau.size());
    case FlowRule::Kind::Box: {
        Vec out(tau.size());
        for (Index i = 0; i < tau.size(); ++i)
            out[i] = (smoothed_max_d2(tau[i] - rule.hi()[i], p.epsilon) -
                      smoothed_max_d2(rule.lo()[i] - tau[i], p.epsilon)) *
                     h1[i] * h2[i] / p.lambda;
        return out;
    }
    case FlowRule::Kind::VonMises: {
        const int d = rule.spatial_dim();
        check_block_symmetry(tau, d, rule.n_pts());
        const int b = d * d;
        const double s0 = rule.sigma0();
        Vec out = Vec::Zero(tau.size());
        for (int pt = 0; pt < rule.n_pts(); ++pt) {
            auto blk = block_view(tau, pt, d);
            const double r = blk.dev.norm();
            if (r == 0.0) continue;
            const double arg = 1.0 - s0 / r;
            const double m1 = smoothed_max_d1(arg, p.epsilon);
            const double m2 = smoothed_max_d2(arg, p.epsilon);
            Vec h1dev = deviator(h1.segment(pt * b, b), d);
            Vec h2dev = deviator(h2.segment(pt * b, b), d);
            const double i1 = blk.dev.dot(h1dev);
            const double i2 = blk.dev.dot(h2dev);
            const double i12 = h1dev.dot(h2dev);
            const double r3 = r * r * r;
            Vec term = m2 * (s0 / r3) * i1 * i2 * blk.dev;
            term += m1 * (-3.0 / (r * r) * i1 * i2 * blk.dev + i12 * blk.dev + i1 * h2dev +
                          i2 * h1dev);
            out.segment(pt * b, b) = (s0 / (p.lambda * r3)) * term;
        }
        return out;
    }
    }
    throw Error("smoothed_hvp: unknown rule");
}

Mat smoothed_jacobian(const FlowRule& rule, const Vec& tau, const RegParams& p) {
    rule.check_dim(tau.size());
    const Index n = tau.size();
    switch (rule.kind()) {
    case FlowRule::Kind::Linear:
        return (rule.kappa() / (1.0 + p.lambda * rule.kappa())) * Mat::Identity(n, n);
    case FlowRule::Kind::Box: {
        Mat J = Mat::Zero(n, n);
        for (Index i = 0; i < n; ++i)
            J(i, i) = (smoothed_max_d1(tau[i] - rule.hi()[i], p.epsilon) +
                       smoothed_max_d1(rule.lo()[i] - tau[i], p.epsilon)) /
                      p.lambda;
        return J;
    }
    case FlowRule::Kind::VonMises: {
        const int d = rule.spatial_dim();
        check_block_symmetry(tau, d, rule.n_pts());
        const int b = d * d;
        const double s0 = rule.sigma0();
        const Mat D = deviator_projector(d);
        Mat J = Mat::Zero(n, n);
        for (int pt = 0; pt < rule.n_pts(); ++pt) {
            auto blk = block_view(tau, pt, d);
            const double r = blk.dev.norm();
            if (r == 0.0) continue;
            const double arg = 1.0 - s0 / r;
            const double m0 = smoothed_max(arg, p.epsilon);
            const double m1 = smoothed_max_d1(arg, p.epsilon);
            J.block(pt * b, pt * b, b, b) =
                (m1 * s0 / (r * r * r) / p.lambda) * (blk.dev * blk.dev.transpose()) +
                (m0 / p.lambda) * D;
        }
        return J;
    }
    }
    throw Error("smoothed_jacobian: unknown rule");
}

Mat yosida_jacobian(const FlowRule& rule, const Vec& h, double lambda) {
    rule.check_dim(h.size());
    const Index n = h.size();
    switch (rule.kind()) {
    case FlowRule::Kind::Linear:
        return (rule.kappa() / (1.0 + lambda * rule.kappa())) * Mat::Identity(n, n);
    case FlowRule::Kind::Box: {
        Mat J = Mat::Zero(n, n);
        for (Index i = 0; i < n; ++i)
            if (h[i] > rule.hi()[i] || h[i] < rule.lo()[i]) J(i, i) = 1.0 / lambda;
        return J;
    }
    case FlowRule::Kind::VonMises: {
        const int d = rule.spatial_dim();
        const int b = d * d;
        const double s0 = rule.sigma0();
        const Mat D = deviator_projector(d);
        Mat J = Mat::Zero(n, n);
        for (int pt = 0; pt < rule.n_pts(); ++pt) {
            auto blk = block_view(h, pt, d);
            const double r = blk.dev.norm();
            if (r <= s0) continue;
            J.block(pt * b, pt * b, b, b) =
                (s0 / (r * r * r) / lambda) * (blk.dev * blk.dev.transpose()) +
                ((1.0 - s0 / r) / lambda) * D;
        }
        return J;
    }
    }
    throw Error("yosida_jacobian: unknown rule");
}

} // namespace monoflow
