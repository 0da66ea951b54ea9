#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "monoflow/linalg.hpp"

namespace monoflow {

/// Discretized data of the homogenized plasticity system.
///
/// Layout: strain/stress DOFs are grouped per material point into flattened
/// symmetric d x d blocks (s = n_pts * d * d), so the elasticity map C is
/// block diagonal. Displacement DOFs split into a macro part (the first
/// n_macro entries, targeted by the load injection P) and a micro remainder.
struct PlasticityData {
    PlasticityData(Mat E_, SymPosDefMap C_, Mat B_, SymPosDefMap Bh_, Mat P_, Mat avg_,
                   int d_, int n_pts_, Index n_macro_, double c_floor_, double b_floor_,
                   std::uint64_t seed_ = 0);

    Mat E;          // combined gradient, displacement DOFs -> strain DOFs
    SymPosDefMap C; // elasticity tensor on strain DOFs
    Mat B;          // internal variables -> strains
    SymPosDefMap Bh; // hardening operator on internal variables
    Mat P;          // load injection, control DOFs -> displacement DOFs
    Mat avg;        // cell average on stress DOFs

    int d;
    int n_pts;
    Index n_macro;
    double c_floor; // guaranteed coercivity of C
    double b_floor; // guaranteed coercivity of Bh
    std::uint64_t seed; // provenance of generated instances (0 for hand-built)

    Index n_displacement() const { return E.cols(); }
    Index n_strain() const { return E.rows(); }
    Index n_internal() const { return B.cols(); }
    Index n_loads() const { return P.cols(); }
};

/// Operators of the reduced evolution dz/dt in A(R l - Q z).
struct AssembledOperators {
    SymPosDefMap Q;             // B^T C B + Bh - T
    Mat R;                      // B^T C E (E^T C E)^{-1} P
    Mat T;                      // B^T C E (E^T C E)^{-1} E^T C B
    std::optional<SymPosDefMap> G; // factorization of E^T C E (absent when E = 0)
};

/// Builds Q, R, T from the plasticity data and verifies symmetry and
/// coercivity of the result. Throws CoercivityViolated with the offending
/// eigenvalue otherwise.
AssembledOperators assemble(const PlasticityData& data);

struct RecoveredState {
    Vec u;     // macro displacement DOFs
    Vec v;     // micro displacement DOFs
    Vec sigma; // stress DOFs
    Vec w;     // full displacement vector (u; v)
};

/// Solves the elastic subproblem for given internal variable and load:
/// w = (E^T C E)^{-1} (E^T C B z + P l), Sigma = C (E w - B z).
RecoveredState recover_state(const AssembledOperators& ops, const PlasticityData& data,
                             const Vec& z, const Vec& load);

struct ToySizes {
    int d = 3;
    int n_pts = 2;
    Index n_displacement = 12;
    Index n_macro = 6;
    Index m_internal = 18; // == n_pts * d * d gives B = identity (von Mises layout)
    Index p_loads = 4;
};

/// Reproducible random instance: block-diagonal SPD C per material point,
/// symmetric Bh with min eig >= b_floor, full-rank E mapping into symmetric
/// strain blocks. Deterministic for a given seed.
PlasticityData make_toy_instance(std::uint64_t seed, const ToySizes& sizes, double c_floor,
                                 double b_floor);

void write_instance_json(const std::string& path, const PlasticityData& data);
PlasticityData read_instance_json(const std::string& path);

} // namespace monoflow
