#pragma once

#include "prefot/geometry.hpp"

#include <Eigen/Core>

#include <cstdint>

namespace prefot {

/// Multipliers of the augmented Lagrangian, i.e. the transport fields.
/// Bulk arrays are indexed by mesh.bulk_prism(slab, tri), curve arrays by
/// mesh.curve_prism(slab, edge).
struct PrimalState {
    Eigen::VectorXd rho, Jx, Jy;
    Eigen::VectorXd mu, V, f;
    std::uint64_t mesh_id = 0;

    static PrimalState zeros(const SpaceTimeMesh& mesh);
    bool all_finite() const;
};

/// Nodal potentials and the projected duals (starred variables).
/// phi is indexed k * n_vertices + v, phi1d k * n_curve_nodes + c, k being
/// the time node 0..n_t.
struct DualState {
    Eigen::VectorXd phi, phi1d;
    Eigen::VectorXd rho_s, Jx_s, Jy_s;
    Eigen::VectorXd mu_s, V_s, f_s;
    std::uint64_t mesh_id = 0;

    static DualState zeros(const SpaceTimeMesh& mesh);
};

/// Nodal initial and final densities: bulk per mesh vertex, curve per
/// curve node (density per unit arclength).
struct BoundaryData {
    Eigen::VectorXd rho0, rho1;
    Eigen::VectorXd mu0, mu1;
    std::uint64_t mesh_id = 0;
};

/// Integral of the piecewise linear interpolant of nodal bulk values.
double bulk_mass(const SpaceTimeMesh& mesh, const Eigen::VectorXd& nodal);
/// Integral along the curve of the piecewise linear interpolant of nodal
/// curve values.
double curve_mass(const SpaceTimeMesh& mesh, const Eigen::VectorXd& nodal);

}  // namespace prefot
