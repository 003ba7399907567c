#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace prefot {

using Vec2 = Eigen::Vector2d;

/// Piecewise linear preferential path. Points are ordered along the curve
/// parameter; segment i joins points[i] and points[i+1].
class Polyline {
public:
    Polyline() = default;
    explicit Polyline(std::vector<Vec2> points) : points_(std::move(points)) {}

    const std::vector<Vec2>& points() const { return points_; }
    std::vector<Vec2>& points() { return points_; }
    const Vec2& point(std::size_t i) const { return points_[i]; }

    bool empty() const { return points_.empty(); }
    int n_points() const { return static_cast<int>(points_.size()); }
    int n_segments() const { return points_.size() < 2 ? 0 : static_cast<int>(points_.size()) - 1; }

    double segment_length(int i) const { return (points_[i + 1] - points_[i]).norm(); }
    Vec2 tangent(int i) const { return (points_[i + 1] - points_[i]) / segment_length(i); }
    double length() const;

    /// Flattened control coordinates (x0, y0, x1, y1, ...).
    Eigen::VectorXd coordinates() const;
    static Polyline from_coordinates(const Eigen::VectorXd& coords);

    Polyline reversed() const;

private:
    std::vector<Vec2> points_;
};

struct CurveCheck {
    bool ok = true;
    std::string reason;
};

/// Zero-length segments, fold-backs of adjacent segments and any contact
/// between non-adjacent segments make a polyline invalid.
CurveCheck check_polyline(const Polyline& curve);

/// Throws ErrorKind::CurveSelfIntersection when check_polyline fails.
void validate_polyline(const Polyline& curve);

/// Componentwise clamp of every control point into [delta, 1 - delta]^2.
Polyline project_box(const Polyline& curve, double delta);

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);
double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

/// One spatial mesh edge lying on the curve. v0 -> v1 follows increasing
/// curve parameter; c0/c1 index the curve nodes.
struct CurveEdge {
    int v0 = -1;
    int v1 = -1;
    int c0 = -1;
    int c1 = -1;
    int segment = -1;
    int edge = -1;
    bool forward = true;  // edges[edge] is stored as (v0, v1)
    double length = 0.0;
};

/// Curve node location on the polyline: segment index and local parameter.
struct CurveParam {
    int segment = 0;
    double u = 0.0;
};

/// Triangulation of the unit square in which the curve is a chain of edges,
/// extruded over n_t uniform time slabs. Prisms are implicit (slab, cell)
/// pairs numbered slab-major.
struct SpaceTimeMesh {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles;  // counter-clockwise
    std::vector<double> areas;
    std::vector<std::array<int, 2>> edges;      // unique, a < b
    std::vector<std::array<int, 3>> triangle_edges;  // edge opposite local vertex k
    std::vector<int> curve_nodes;                // mesh vertex of each curve node
    std::vector<CurveParam> curve_params;
    std::vector<CurveEdge> curve_edges;
    Polyline curve;
    double h = 0.0;
    int n_t = 1;
    std::uint64_t id = 0;

    int n_vertices() const { return static_cast<int>(vertices.size()); }
    int n_triangles() const { return static_cast<int>(triangles.size()); }
    int n_curve_nodes() const { return static_cast<int>(curve_nodes.size()); }
    int n_curve_edges() const { return static_cast<int>(curve_edges.size()); }
    bool has_curve() const { return !curve_edges.empty(); }
    double dt() const { return 1.0 / n_t; }

    int n_bulk_prisms() const { return n_t * n_triangles(); }
    int n_curve_prisms() const { return n_t * n_curve_edges(); }
    int bulk_prism(int slab, int tri) const { return slab * n_triangles() + tri; }
    int curve_prism(int slab, int e) const { return slab * n_curve_edges() + e; }

    Vec2 barycenter(int tri) const;
    /// Gradients of the three barycentric coordinate functions on a triangle.
    std::array<Vec2, 3> basis_gradients(int tri) const;
    /// Arclength of each curve node measured from the first one.
    std::vector<double> curve_arclength() const;
};

SpaceTimeMesh build_mesh(const Polyline& curve, double h, int n_t);

/// Fresh mesh for a new curve reusing only h and n_t of the previous one.
SpaceTimeMesh remesh(const Polyline& curve, const SpaceTimeMesh& prev);

/// Moves the curve nodes of `base` onto `curve` (same control point count)
/// keeping the connectivity. Returns nullopt when a triangle would invert or
/// degenerate below the sliver threshold.
std::optional<SpaceTimeMesh> deform_mesh(const SpaceTimeMesh& base, const Polyline& curve);

double min_angle_degrees(const SpaceTimeMesh& mesh);
double max_edge_length(const SpaceTimeMesh& mesh);

/// Smallest admissible interior angle; below it meshing fails.
inline constexpr double kMinAngleDegrees = 1.0;

}  // namespace prefot
