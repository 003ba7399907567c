#pragma once

#include "prefot/geometry.hpp"

#include <Eigen/Core>

#include <vector>

namespace prefot {

/// |x - y|^2 / (2 dist(y, x + R tau)) for a unit tangent tau. Infinite when
/// y lies on the tangent line, 0 when x == y (callers skip the diagonal).
double tangent_point_radius(const Vec2& x, const Vec2& tau, const Vec2& y);

struct RegularizerValue {
    double tpe = 0.0;
    double endpoint_log = 0.0;  // -log|first - last|
    double length = 0.0;
    double total = 0.0;
    bool closed = false;  // endpoints closer than kClosedTol; endpoint_log and total are +inf
};

inline constexpr double kClosedTol = 1e-12;
inline constexpr double kDefaultTpeExponent = 3.0;

/// Kernel sum over pairs of segments that share no vertex. With `closed`
/// the last point connects back to the first.
double tangent_point_sum(const std::vector<Vec2>& points, double p, bool closed = false);

/// R_h = tangent-point sum - log|first - last| + length. Requires p > 2.
RegularizerValue discrete_regularizer(const Polyline& curve, double p = kDefaultTpeExponent);

/// Central differences of each regularizer term with respect to the
/// flattened control coordinates. A component whose perturbed curves are
/// invalid (self-intersecting or closed) is zero and marked invalid.
struct RegularizerGradient {
    Eigen::VectorXd tpe;
    Eigen::VectorXd endpoint_log;
    Eigen::VectorXd length;
    Eigen::VectorXd total;
    std::vector<char> valid;
};

RegularizerGradient fd_gradient_reg(const Polyline& curve, double p = kDefaultTpeExponent, double eps = 1e-4);

}  // namespace prefot
