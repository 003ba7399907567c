#pragma once

#include "prefot/fields.hpp"
#include "prefot/geometry.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <memory>

namespace prefot {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class LinearSolverKind {
    Tensor,  // time-mode diagonalization with one sparse factorization per mode
    Cg,      // Jacobi preconditioned conjugate gradients with kernel deflation
};

struct LinearSolverOptions {
    LinearSolverKind kind = LinearSolverKind::Tensor;
    double tol = 1e-8;
    int max_iters = 0;  // 0 means 10 * ndof
};

/// Spatial and temporal finite element matrices on one mesh.
struct FemMatrices {
    SparseMatrix M, K;    // P1 mass / stiffness on the triangulation
    SparseMatrix Mc, Kc;  // P1 mass / stiffness along the curve
    SparseMatrix P;       // curve node <- mesh vertex restriction
    SparseMatrix Mt, Kt;  // P1 mass / stiffness in time
};

FemMatrices assemble_fem_matrices(const SpaceTimeMesh& mesh);

struct TensorFactorization;

/// Step-1 operator on the stacked coefficient vector (phi, phi1d), with
/// the layout of DualState::phi followed by DualState::phi1d.
struct SaddleSystem {
    SparseMatrix matrix;
    Eigen::VectorXd kernel;  // normalized joint constant
    FemMatrices fem;
    double r1 = 1.0;
    double r2 = 1.0;
    int n_vertices = 0;
    int n_curve_nodes = 0;
    int n_t = 1;
    std::uint64_t mesh_id = 0;
    LinearSolverOptions options;
    std::shared_ptr<const TensorFactorization> tensor;

    int n_bulk_dofs() const { return (n_t + 1) * n_vertices; }
    int n_dofs() const { return (n_t + 1) * (n_vertices + n_curve_nodes); }
};

SaddleSystem assemble_matrix(const SpaceTimeMesh& mesh, double r1, double r2,
                             const LinearSolverOptions& options = {});

Eigen::VectorXd assemble_rhs(const SpaceTimeMesh& mesh, const PrimalState& state, const DualState& duals,
                             const BoundaryData& data, double r1, double r2);

struct Potentials {
    Eigen::VectorXd phi, phi1d;
    int iterations = 0;
    double residual = 0.0;  // relative, against the projected rhs
};

/// Solves A x = P rhs, P removing the joint-constant component; the result
/// has zero joint mean.
Potentials solve_potentials(const SaddleSystem& system, const Eigen::VectorXd& rhs);

/// Prism averages of the derivatives of the potentials. These are the
/// L2 projections onto piecewise constants, so they pair exactly with the
/// prism fields.
struct PrismDerivatives {
    Eigen::VectorXd dt_phi, gx_phi, gy_phi;         // bulk prisms
    Eigen::VectorXd dt_phi1d, ds_phi1d, jump;       // curve prisms; jump = phi1d - phi on the curve
};

PrismDerivatives prism_derivatives(const SpaceTimeMesh& mesh, const Eigen::VectorXd& phi,
                                   const Eigen::VectorXd& phi1d);

/// Stacks bulk and curve coefficients into one vector and back.
Eigen::VectorXd stack(const Eigen::VectorXd& phi, const Eigen::VectorXd& phi1d);

}  // namespace prefot
