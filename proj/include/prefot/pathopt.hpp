#pragma once

#include "prefot/curvereg.hpp"
#include "prefot/transport.hpp"

#include <string>
#include <vector>

namespace prefot {

/// Componentwise sign then global normalization, or the raw filtered
/// gradient normalized once.
enum class DirectionMode { Sign, Gradient };

struct PathOptConfig {
    double eps_fd = 1e-4;
    double step0 = 0.01;
    double c0 = 1e-3;
    double c_low = 1e-5;
    int n_iter = 3;  // consecutive zero directions before c is halved
    int it_max = 100;
    int inner_alg_iters = 1;
    double tol = 1e-6;
    double delta = 0.05;        // box [delta, 1 - delta] for control points
    double tpe_exponent = kDefaultTpeExponent;
    // |D_iA| must beat c|D_iR| by this much; keeps solver noise from moving
    // a curve that sits at a flat point
    double grad_floor = 1e-4;
    double backtrack_growth = 0.05;  // allowed relative increase of the total cost
    int max_halvings = 5;
    DirectionMode direction = DirectionMode::Sign;
};

/// Every out-of-range field, named; empty when the config is usable.
std::vector<std::string> violations(const PathOptConfig& cfg);
/// Throws ValidationError listing all violations.
void validate(const PathOptConfig& cfg);

/// Everything needed to evaluate the action near a given curve.
struct TransportContext {
    SpaceTimeMesh mesh;
    BoundaryData data;
    PrimalState state;
    DualState duals;
};

struct ActionGradient {
    Eigen::VectorXd values;
    std::vector<char> valid;
    std::vector<double> plus, minus;  // action at the perturbed curves
};

/// Central differences of the discrete action over the flattened control
/// coordinates. Each perturbed curve is boxed, meshed by moving the curve
/// nodes of ctx.mesh (full remesh if that fails), and gets inner_alg_iters
/// ALG iterations warm-started from ctx.
ActionGradient fd_gradient_action(const Polyline& curve, const TransportContext& ctx, const DataSpec& data,
                                  const TransportConfig& tcfg, const PathOptConfig& pcfg);

/// Filtered direction: component i is active when
/// |gA_i| > c |gR_i| + floor and is otherwise 0. Invalid components stay 0.
/// The result has unit length unless it is all zero.
Eigen::VectorXd descent_direction(const Eigen::VectorXd& gA, const Eigen::VectorXd& gR, double c,
                                  double floor = 0.0, DirectionMode mode = DirectionMode::Sign,
                                  const std::vector<char>& valid = {});

struct PathTraceEntry {
    int outer_iter = 0;
    Polyline curve;
    double action = 0.0;
    double regularizer = 0.0;
    double total = 0.0;  // action + c * regularizer
    double step = 0.0;
    double c = 0.0;
    int frozen = 0;  // components blocked by the filter
    bool moved = false;
    double err = 0.0;
    double err_alg = 0.0;
    int alg_iterations = 0;
};

struct PathTrace {
    std::vector<PathTraceEntry> entries;
    std::string stop_reason;
};

struct PathOptResult {
    Polyline curve;
    PathTrace trace;
    TransportContext final;
    SolveReport report;
};

/// Projected descent on the control points with full ALG solves after
/// every accepted move. Aborts with the last valid trace when no valid
/// curve can be reached.
PathOptResult optimize_path(const Polyline& initial, const DataSpec& data, double h, int n_t,
                            const TransportConfig& tcfg, const PathOptConfig& pcfg);

}  // namespace prefot
