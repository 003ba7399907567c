#pragma once

#include "prefot/geometry.hpp"

namespace prefot {

inline constexpr double kProjectionTol = 1e-10;

struct BulkProjection {
    double rho = 0.0;
    Vec2 J = Vec2::Zero();
    int iterations = 0;     // Newton steps, 0 when the input was feasible
    bool bisected = false;  // Newton gave up and bisection finished the job
};

/// Nearest point of {a + |b|^2/2 <= 0} to (eta_rho, eta_J).
BulkProjection project_bulk(double eta_rho, const Vec2& eta_J, double tol = kProjectionTol);

struct CurveProjection {
    double mu = 0.0;
    double V = 0.0;
    double f = 0.0;
    int iterations = 0;
    bool fallback = false;  // 2x2 Newton failed, multiplier iteration used
};

/// Nearest point of {m + (v^2/alpha1 + w^2/alpha2)/2 <= 0} to the input.
CurveProjection project_curve(double eta_mu, double eta_V, double eta_f, double alpha1, double alpha2,
                              double tol = kProjectionTol);

/// Same projection computed through the scalar multiplier equation only.
/// Used as the fallback of project_curve.
CurveProjection project_curve_multiplier(double eta_mu, double eta_V, double eta_f, double alpha1, double alpha2,
                                         double tol = kProjectionTol);

}  // namespace prefot
