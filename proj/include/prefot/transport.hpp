#pragma once

#include "prefot/femspace.hpp"
#include "prefot/fields.hpp"
#include "prefot/geometry.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace prefot {

/// f_{mx,my,sigma} scaled by weight.
struct Bump {
    double mx = 0.5;
    double my = 0.5;
    double sigma = 0.1;
    double weight = 1.0;
};

/// Where an end density lives: the Gaussian sum is sampled on the bulk
/// nodes, on the curve nodes, or on both.
enum class Support { Both, Bulk, Curve };

struct EndSpec {
    std::vector<Bump> bumps;
    Support support = Support::Both;
};

struct DataSpec {
    EndSpec initial;
    EndSpec final;
    // the curve stands for a strip of this width: curve density is the trace
    // times the width, and 0 means the mesh size h
    double curve_width = 0.0;
};

/// Bulk density = nodal interpolant of the bump sum, curve density = its
/// trace per unit arclength scaled by the strip width; each end is
/// normalized to total mass 1.
BoundaryData make_boundary_data(const DataSpec& spec, const SpaceTimeMesh& mesh);

struct TransportConfig {
    double alpha1 = 1.0;
    double alpha2 = 1.0;
    double r1 = 1.0;
    double r2 = 1.0;
    double tol = 1e-5;
    int max_iters = 5000;
    double projection_tol = 1e-10;
    LinearSolverOptions linear;
};

struct StepErrors {
    double err_omega = 0.0;
    double err_gamma = 0.0;
    double solve_residual = 0.0;
};

/// One augmented Lagrangian iteration: potential solve, pointwise
/// projection, multiplier ascent. Updates state and duals in place.
StepErrors alg_step(const SpaceTimeMesh& mesh, const SaddleSystem& system, const BoundaryData& data,
                    const TransportConfig& config, PrimalState& state, DualState& duals);

struct ActionValue {
    double value = 0.0;  // +inf when flagged
    double bulk = 0.0;
    double curve_V = 0.0;  // includes alpha1
    double curve_f = 0.0;  // includes alpha2
    bool infinite = false;
    int flagged_cells = 0;
};

/// Flux magnitudes at or below this count as zero in vacuum cells.
inline constexpr double kVacuumTol = 1e-12;

/// Sum over prisms of |v|^2/(2u) times the prism measure, with alpha1 on
/// the curve momentum and alpha2 on the exchange term.
ActionValue discrete_action(const PrimalState& state, const SpaceTimeMesh& mesh, double alpha1, double alpha2);

/// Concave mobility on the closed interval [lo, hi].
struct Mobility {
    std::function<double(double)> m;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();

    static Mobility linear();
};

/// Integral of |w|^2 / m(z) over bulk and curve prisms (no factor 1/2).
ActionValue evaluate_mobility_action(const PrimalState& state, const SpaceTimeMesh& mesh, const Mobility& bulk,
                                     const Mobility& curve, double alpha1, double alpha2);

struct TraceEntry {
    int iter = 0;
    double err_omega = 0.0;
    double err_gamma = 0.0;
    double action = 0.0;
};

struct SolveReport {
    int iterations = 0;
    bool converged = false;
    double err_alg = std::numeric_limits<double>::infinity();
    ActionValue action;
    std::vector<TraceEntry> trace;
    std::string stop_reason;
};

/// Runs alg_step until err_omega + err_gamma <= tol or max_iters.
SolveReport run_alg(const SpaceTimeMesh& mesh, const SaddleSystem& system, const BoundaryData& data,
                    const TransportConfig& config, PrimalState& state, DualState& duals, int max_iters,
                    bool record_trace = true);

/// Starting iterate: densities interpolated linearly in time between the
/// cell averages of the end data, zero fluxes.
PrimalState interpolated_state(const SpaceTimeMesh& mesh, const BoundaryData& data);

struct FixedCurveResult {
    SpaceTimeMesh mesh;
    BoundaryData data;
    PrimalState state;
    DualState duals;
    SolveReport report;
};

/// Meshes the curve, builds the data and runs the solver from zero fields.
FixedCurveResult solve_fixed_curve(const Polyline& curve, const DataSpec& data, double h, int n_t,
                                   const TransportConfig& config);

/// Nearest-barycenter injection of prism fields between meshes with the same
/// number of time slabs. Curve prisms take the value of the nearest curve
/// edge midpoint (zero when the source has no curve).
PrimalState transfer_state(const SpaceTimeMesh& from, const PrimalState& state, const SpaceTimeMesh& to);
DualState transfer_duals(const SpaceTimeMesh& from, const DualState& duals, const SpaceTimeMesh& to);

/// Time-integrated |V| on the curve over the same quantity plus
/// time-integrated |J| in the bulk.
double curve_flux_share(const PrimalState& state, const SpaceTimeMesh& mesh);

struct TubeFlux {
    double curve = 0.0;  // integral of |V| over curve prisms (per unit length)
    double tube = 0.0;   // integral of |J| over bulk prisms with barycenter within `radius` of the curve
};
TubeFlux tube_flux(const PrimalState& state, const SpaceTimeMesh& mesh, double radius);

}  // namespace prefot
