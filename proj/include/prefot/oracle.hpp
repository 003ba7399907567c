#pragma once

#include "prefot/fields.hpp"
#include "prefot/geometry.hpp"

#include <functional>
#include <vector>

namespace prefot {

/// Bisection on a sign change; stops when |f| <= 1e-13 or the bracket can
/// no longer be split. Throws NoBracket without a sign change.
double bracketed_root(const std::function<double(double)>& f, double lo, double hi);

/// Root of a3 x^3 + a2 x^2 + a1 x + a0 in [lo, hi] by bisection.
double cubic_root(double a3, double a2, double a1, double a0, double lo, double hi);

/// Bulk projection recomputed by bisection on [0, |eta_J|].
struct BulkOracle {
    double rho = 0.0;
    Vec2 J = Vec2::Zero();
};
BulkOracle bulk_projection_oracle(double eta_rho, const Vec2& eta_J);

/// Curve projection recomputed by bisection on the multiplier of the
/// constraint, carried out in extended precision.
struct CurveOracle {
    double mu = 0.0;
    double V = 0.0;
    double f = 0.0;
};
CurveOracle curve_projection_oracle(double eta_mu, double eta_V, double eta_f, double alpha1, double alpha2);

/// With alpha1 == alpha2 == alpha and |eta_V| == |eta_f| == a the curve
/// system has x == y solving 2x^3 + 2(alpha^2 + alpha eta_mu) x - 2 alpha^2 a = 0.
double symmetric_curve_root(double eta_mu, double a, double alpha);

struct DiscreteMeasure {
    std::vector<Vec2> points;
    std::vector<double> weights;
};

struct TransportPlanEntry {
    int from = 0;
    int to = 0;
    double mass = 0.0;
};

struct W2Result {
    double cost = 0.0;         // inf over couplings of sum |x - y|^2 mass
    double dual_cost = 0.0;    // value of the certified dual solution
    double certificate = 0.0;  // max of duality gap and reduced-cost violations
    std::vector<TransportPlanEntry> plan;
};

/// Exact discrete optimal transport with squared Euclidean cost by
/// successive shortest paths. Throws Infeasible when the masses differ by
/// more than 1e-12.
W2Result w2_squared_lp(const DiscreteMeasure& a, const DiscreteMeasure& b);

/// Lumps a bulk nodal density and a curve nodal density into at most
/// atoms_per_axis^2 atoms, one per occupied cell of a uniform grid, placed
/// at the mass centroid of the cell. Weights are normalized to 1.
DiscreteMeasure atomize(const SpaceTimeMesh& mesh, const Eigen::VectorXd& bulk, const Eigen::VectorXd& curve,
                        int atoms_per_axis);

struct MassReport {
    std::vector<double> slab_mass;  // bulk + curve, one per time slab
    double reference = 1.0;         // total mass of the initial data
    double max_deviation = 0.0;     // max over slabs of |mass - 1|
};

MassReport check_mass_conservation(const PrimalState& state, const SpaceTimeMesh& mesh, const BoundaryData& data);

}  // namespace prefot
