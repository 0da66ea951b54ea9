#include "monoflow/homogenized.hpp"

#include <fstream>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "monoflow/rng.hpp"

namespace monoflow {

PlasticityData::PlasticityData(Mat E_, SymPosDefMap C_, Mat B_, SymPosDefMap Bh_, Mat P_,
                               Mat avg_, int d_, int n_pts_, Index n_macro_, double c_floor_,
                               double b_floor_, std::uint64_t seed_)
    : E(std::move(E_)), C(std::move(C_)), B(std::move(B_)), Bh(std::move(Bh_)),
      P(std::move(P_)), avg(std::move(avg_)), d(d_), n_pts(n_pts_), n_macro(n_macro_),
      c_floor(c_floor_), b_floor(b_floor_), seed(seed_) {
    const Index s = static_cast<Index>(d) * d * n_pts;
    if (E.rows() != s) throw DimensionMismatch("PlasticityData: E rows", E.rows(), s);
    if (C.dim() != s) throw DimensionMismatch("PlasticityData: C", C.dim(), s);
    if (B.rows() != s) throw DimensionMismatch("PlasticityData: B rows", B.rows(), s);
    if (Bh.dim() != B.cols()) throw DimensionMismatch("PlasticityData: Bh", Bh.dim(), B.cols());
    if (P.rows() != E.cols()) throw DimensionMismatch("PlasticityData: P rows", P.rows(), E.cols());
    if (avg.cols() != s) throw DimensionMismatch("PlasticityData: avg cols", avg.cols(), s);
    if (n_macro < 0 || n_macro > E.cols())
        throw Error("PlasticityData: macro split exceeds displacement dimension");
    if (!(c_floor > 0.0) || !(b_floor > 0.0))
        throw Error("PlasticityData: coercivity floors must be positive");
    if (C.min_eig() < c_floor * (1.0 - 1e-9))
        throw CoercivityViolated("C", C.min_eig());
    if (Bh.min_eig() < b_floor * (1.0 - 1e-9))
        throw CoercivityViolated("Bh", Bh.min_eig());
}

AssembledOperators assemble(const PlasticityData& data) {
    const Index m = data.n_internal();
    const bool elastic_coupling = data.E.size() > 0 && data.E.cwiseAbs().maxCoeff() > 0.0;

    Mat T = Mat::Zero(m, m);
    Mat R = Mat::Zero(m, data.n_loads());
    std::optional<SymPosDefMap> G;
    if (elastic_coupling) {
        Mat gmat = data.E.transpose() * data.C.matrix() * data.E;
        try {
            G.emplace(std::move(gmat));
        } catch (const NonSpd&) {
            const double lam =
                Eigen::SelfAdjointEigenSolver<Mat>(data.E.transpose() * data.C.matrix() * data.E,
                                                   Eigen::EigenvaluesOnly)
                    .eigenvalues()
                    .minCoeff();
            throw CoercivityViolated("E^T C E", lam);
        }
        const Mat M = data.E.transpose() * data.C.matrix() * data.B; // n x m
        T = M.transpose() * G->solve(M);
        R = M.transpose() * G->solve(data.P);
    }

    Mat q_mat = data.B.transpose() * data.C.matrix() * data.B + data.Bh.matrix() - T;
    // B^T C B - T is positive semidefinite by construction; verify by a
    // shifted factorization before handing Q to the SPD wrapper.
    {
        Mat S = q_mat - data.Bh.matrix();
        const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
        Eigen::LLT<Mat> probe(Mat(S + 2e-8 * scale * Mat::Identity(m, m)));
        if (probe.info() != Eigen::Success) {
            const double lam = Eigen::SelfAdjointEigenSolver<Mat>(S, Eigen::EigenvaluesOnly)
                                   .eigenvalues()
                                   .minCoeff();
            throw CoercivityViolated("B^T C B - T", lam);
        }
    }
    try {
        SymPosDefMap Q(std::move(q_mat));
        if (Q.min_eig() < data.b_floor - 1e-8) throw CoercivityViolated("Q", Q.min_eig());
        return AssembledOperators{std::move(Q), std::move(R), std::move(T), std::move(G)};
    } catch (const NonSpd&) {
        const double lam = Eigen::SelfAdjointEigenSolver<Mat>(
                               Mat(data.B.transpose() * data.C.matrix() * data.B +
                                   data.Bh.matrix() - T),
                               Eigen::EigenvaluesOnly)
                               .eigenvalues()
                               .minCoeff();
        throw CoercivityViolated("Q", lam);
    }
}

RecoveredState recover_state(const AssembledOperators& ops, const PlasticityData& data,
                             const Vec& z, const Vec& load) {
    if (z.size() != data.n_internal())
        throw DimensionMismatch("recover_state: z", z.size(), data.n_internal());
    if (load.size() != data.n_loads())
        throw DimensionMismatch("recover_state: load", load.size(), data.n_loads());
    if (!ops.G)
        throw Error("recover_state: instance has no elastic coupling (E = 0)");
    const Vec rhs = data.E.transpose() * (data.C.matrix() * (data.B * z)) + data.P * load;
    const Vec w = ops.G->solve(rhs);
    const Vec sigma = data.C.matrix() * (data.E * w - data.B * z);
    RecoveredState out;
    out.u = w.head(data.n_macro);
    out.v = w.tail(w.size() - data.n_macro);
    out.sigma = sigma;
    out.w = w;
    return out;
}

namespace {

/// Symmetrizer on flattened d x d blocks: vec(h) -> vec((h + h^T)/2).
Mat symmetrizer(int d) {
    const int b = d * d;
    Mat S = Mat::Zero(b, b);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            S(i * d + j, i * d + j) += 0.5;
            S(i * d + j, j * d + i) += 0.5;
        }
    return S;
}

/// Random flattened symmetric d x d block with entries O(1).
Vec random_sym_block(Rng& rng, int d) {
    Vec blk(d * d);
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            const double v = rng.normal();
            blk[i * d + j] = v;
            blk[j * d + i] = v;
        }
    return blk;
}

/// SPD block that preserves the symmetric-matrix subspace:
/// P (A^T A) P / b + floor * I with P the symmetrizer.
Mat random_spd_sym_block(Rng& rng, int d, double floor) {
    const int b = d * d;
    const Mat P = symmetrizer(d);
    const Mat A = rng.normal_matrix(b, b);
    return P * (A.transpose() * A) * P / b + floor * Mat::Identity(b, b);
}

} // namespace

PlasticityData make_toy_instance(std::uint64_t seed, const ToySizes& sizes, double c_floor,
                                 double b_floor) {
    if (sizes.d != 2 && sizes.d != 3) throw Error("make_toy_instance: d must be 2 or 3");
    if (sizes.n_pts < 1 || sizes.n_displacement < 1 || sizes.p_loads < 1 ||
        sizes.m_internal < 1)
        throw Error("make_toy_instance: sizes must be positive");
    if (!(c_floor > 0.0) || !(b_floor > 0.0))
        throw Error("make_toy_instance: floors must be positive");
    const int d = sizes.d;
    const int b = d * d;
    const Index s = static_cast<Index>(b) * sizes.n_pts;
    if (sizes.n_displacement > s)
        throw Error("make_toy_instance: more displacement DOFs than strain DOFs");
    if (sizes.m_internal > s)
        throw Error("make_toy_instance: more internal DOFs than strain DOFs");
    if (sizes.n_macro < 1 || sizes.n_macro > sizes.n_displacement)
        throw Error("make_toy_instance: invalid macro split");

    Rng rng(seed);

    // E: columns are symmetric strain blocks, so E w stays in the symmetric
    // subspace for every displacement vector w.
    Mat E(s, sizes.n_displacement);
    for (Index j = 0; j < sizes.n_displacement; ++j)
        for (int p = 0; p < sizes.n_pts; ++p)
            E.block(p * b, j, b, 1) = random_sym_block(rng, d);
    E /= std::sqrt(static_cast<double>(s));

    Mat C = Mat::Zero(s, s);
    for (int p = 0; p < sizes.n_pts; ++p)
        C.block(p * b, p * b, b, b) = random_spd_sym_block(rng, d, c_floor);

    Mat B;
    if (sizes.m_internal == s) {
        B = Mat::Identity(s, s);
    } else {
        B = Mat(s, sizes.m_internal);
        for (Index j = 0; j < sizes.m_internal; ++j)
            for (int p = 0; p < sizes.n_pts; ++p)
                B.block(p * b, j, b, 1) = random_sym_block(rng, d);
        B /= std::sqrt(static_cast<double>(s));
    }

    Mat Bh;
    if (sizes.m_internal == s) {
        Bh = Mat::Zero(s, s);
        for (int p = 0; p < sizes.n_pts; ++p)
            Bh.block(p * b, p * b, b, b) = random_spd_sym_block(rng, d, b_floor);
    } else {
        const Mat A = rng.normal_matrix(sizes.m_internal, sizes.m_internal);
        Bh = A.transpose() * A / static_cast<double>(sizes.m_internal) +
             b_floor * Mat::Identity(sizes.m_internal, sizes.m_internal);
    }

    Mat P = Mat::Zero(sizes.n_displacement, sizes.p_loads);
    for (Index i = 0; i < sizes.n_macro; ++i)
        for (Index j = 0; j < sizes.p_loads; ++j) P(i, j) = rng.normal();

    Mat avg = Mat::Zero(b, s);
    for (int p = 0; p < sizes.n_pts; ++p)
        avg.block(0, p * b, b, b) = Mat::Identity(b, b) / sizes.n_pts;

    return PlasticityData(std::move(E), SymPosDefMap(std::move(C)), std::move(B),
                          SymPosDefMap(std::move(Bh)), std::move(P), std::move(avg), d,
                          sizes.n_pts, sizes.n_macro, c_floor, b_floor, seed);
}

namespace {

nlohmann::json matrix_to_json(const Mat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat matrix_from_json(const nlohmann::json& j, const std::string& name) {
    if (!j.is_array() || j.empty() || !j.front().is_array())
        throw ConfigError("instance file: " + name + " must be a nested array");
    const Index rows = static_cast<Index>(j.size());
    const Index cols = static_cast<Index>(j.front().size());
    Mat m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const auto& row = j.at(static_cast<size_t>(i));
        if (static_cast<Index>(row.size()) != cols)
            throw ConfigError("instance file: ragged rows in " + name);
        for (Index jj = 0; jj < cols; ++jj) m(i, jj) = row.at(static_cast<size_t>(jj)).get<double>();
    }
    return m;
}

} // namespace

void write_instance_json(const std::string& path, const PlasticityData& data) {
    nlohmann::json j;
    j["schema"] = "monoflow-instance-v1";
    j["d"] = data.d;
    j["n_pts"] = data.n_pts;
    j["n_macro"] = data.n_macro;
    j["seed"] = data.seed;
    j["floors"] = {{"c", data.c_floor}, {"b", data.b_floor}};
    j["E"] = matrix_to_json(data.E);
    j["C"] = matrix_to_json(data.C.matrix());
    j["B"] = matrix_to_json(data.B);
    j["Bh"] = matrix_to_json(data.Bh.matrix());
    j["P"] = matrix_to_json(data.P);
    j["avg"] = matrix_to_json(data.avg);
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

PlasticityData read_instance_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open instance file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("instance file " + path + ": " + e.what());
    }
    try {
        if (j.at("schema").get<std::string>() != "monoflow-instance-v1")
            throw ConfigError("instance file " + path + ": unknown schema");
        return PlasticityData(
            matrix_from_json(j.at("E"), "E"), SymPosDefMap(matrix_from_json(j.at("C"), "C")),
            matrix_from_json(j.at("B"), "B"), SymPosDefMap(matrix_from_json(j.at("Bh"), "Bh")),
            matrix_from_json(j.at("P"), "P"), matrix_from_json(j.at("avg"), "avg"),
            j.at("d").get<int>(), j.at("n_pts").get<int>(), j.at("n_macro").get<Index>(),
            j.at("floors").at("c").get<double>(), j.at("floors").at("b").get<double>(),
            j.value("seed", std::uint64_t{0}));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("instance file " + path + ": " + e.what());
    }
}

} // namespace monoflow
