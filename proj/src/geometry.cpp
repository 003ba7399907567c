#include "prefot/geometry.hpp"

#include "delaunay.hpp"
#include "prefot/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

namespace prefot {

namespace {

std::atomic<std::uint64_t> g_mesh_counter{0};

std::uint64_t next_mesh_id() { return ++g_mesh_counter; }

constexpr double kParallelTol = 1e-12;

}  // namespace

double Polyline::length() const {
    double total = 0.0;
    for (int i = 0; i < n_segments(); ++i) total += segment_length(i);
    return total;
}

Eigen::VectorXd Polyline::coordinates() const {
    Eigen::VectorXd c(2 * points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
        c[2 * i] = points_[i].x();
        c[2 * i + 1] = points_[i].y();
    }
    return c;
}

Polyline Polyline::from_coordinates(const Eigen::VectorXd& coords) {
    std::vector<Vec2> pts(coords.size() / 2);
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = Vec2(coords[2 * i], coords[2 * i + 1]);
    return Polyline(std::move(pts));
}

Polyline Polyline::reversed() const {
    std::vector<Vec2> pts(points_.rbegin(), points_.rend());
    return Polyline(std::move(pts));
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 d = b - a;
    const double len2 = d.squaredNorm();
    if (len2 == 0.0) return (p - a).norm();
    const double s = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
    return (p - (a + s * d)).norm();
}

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const double scale = std::max({(b - a).norm(), (d - c).norm(), 1e-300});
    const double tol = 1e-12 * scale * scale;
    const double o1 = detail::orient2d(a, b, c);
    const double o2 = detail::orient2d(a, b, d);
    const double o3 = detail::orient2d(c, d, a);
    const double o4 = detail::orient2d(c, d, b);
    auto sgn = [tol](double v) { return v > tol ? 1 : (v < -tol ? -1 : 0); };
    const int s1 = sgn(o1), s2 = sgn(o2), s3 = sgn(o3), s4 = sgn(o4);
    if (s1 * s2 < 0 && s3 * s4 < 0) return true;
    // touching or collinear overlap
    const double eps = 1e-12 * scale;
    if (s1 == 0 && point_segment_distance(c, a, b) <= eps) return true;
    if (s2 == 0 && point_segment_distance(d, a, b) <= eps) return true;
    if (s3 == 0 && point_segment_distance(a, c, d) <= eps) return true;
    if (s4 == 0 && point_segment_distance(b, c, d) <= eps) return true;
    return false;
}

CurveCheck check_polyline(const Polyline& curve) {
    const int n = curve.n_points();
    if (n == 0) return {};
    if (n == 1) return {false, "a curve needs at least two points"};
    for (int i = 0; i < n; ++i) {
        if (!std::isfinite(curve.point(i).x()) || !std::isfinite(curve.point(i).y())) {
            return {false, "non-finite coordinate at point " + std::to_string(i)};
        }
    }
    for (int i = 0; i < curve.n_segments(); ++i) {
        if (curve.segment_length(i) <= kParallelTol) {
            return {false, "zero-length segment " + std::to_string(i)};
        }
    }
    for (int i = 0; i + 1 < curve.n_segments(); ++i) {
        const Vec2 t0 = curve.tangent(i);
        const Vec2 t1 = curve.tangent(i + 1);
        const double cross = t0.x() * t1.y() - t0.y() * t1.x();
        if (std::abs(cross) <= kParallelTol && t0.dot(t1) < 0.0) {
            return {false, "segments " + std::to_string(i) + " and " + std::to_string(i + 1) +
                               " fold back onto each other"};
        }
    }
    for (int i = 0; i < curve.n_segments(); ++i) {
        for (int j = i + 2; j < curve.n_segments(); ++j) {
            if (segments_intersect(curve.point(i), curve.point(i + 1), curve.point(j),
                                   curve.point(j + 1))) {
                return {false, "segments " + std::to_string(i) + " and " + std::to_string(j) +
                                   " intersect"};
            }
        }
    }
    return {};
}

void validate_polyline(const Polyline& curve) {
    const CurveCheck check = check_polyline(curve);
    if (!check.ok) throw Error(ErrorKind::CurveSelfIntersection, check.reason);
}

Polyline project_box(const Polyline& curve, double delta) {
    std::vector<Vec2> pts = curve.points();
    for (Vec2& p : pts) {
        p.x() = std::min(1.0 - delta, std::max(p.x(), delta));
        p.y() = std::min(1.0 - delta, std::max(p.y(), delta));
    }
    return Polyline(std::move(pts));
}

Vec2 SpaceTimeMesh::barycenter(int tri) const {
    const auto& t = triangles[tri];
    return (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0;
}

std::array<Vec2, 3> SpaceTimeMesh::basis_gradients(int tri) const {
    const auto& t = triangles[tri];
    const Vec2& a = vertices[t[0]];
    const Vec2& b = vertices[t[1]];
    const Vec2& c = vertices[t[2]];
    const double twice_area = detail::orient2d(a, b, c);
    // grad(lambda_k) is the inward normal of the opposite edge over its height
    auto perp = [twice_area](const Vec2& p, const Vec2& q) -> Vec2 {
        return Vec2(p.y() - q.y(), q.x() - p.x()) / twice_area;
    };
    return {perp(b, c), perp(c, a), perp(a, b)};
}

std::vector<double> SpaceTimeMesh::curve_arclength() const {
    std::vector<double> s(curve_nodes.size(), 0.0);
    for (const CurveEdge& e : curve_edges) s[e.c1] = s[e.c0] + e.length;
    return s;
}

namespace {

struct CurveNode {
    Vec2 pos;
    CurveParam param;
};

double triangle_min_angle(const Vec2& a, const Vec2& b, const Vec2& c) {
    auto angle = [](const Vec2& p, const Vec2& q, const Vec2& r) {
        const Vec2 u = q - p;
        const Vec2 v = r - p;
        return std::atan2(std::abs(u.x() * v.y() - u.y() * v.x()), u.dot(v));
    };
    return std::min({angle(a, b, c), angle(b, c, a), angle(c, a, b)}) * 180.0 / std::numbers::pi;
}

// Points of a row-offset lattice with spacing <= h covering the unit square,
// with the boundary lines fully sampled. The layout is mirror symmetric
// under x -> 1 - x.
std::vector<std::pair<Vec2, bool>> lattice_points(double h) {
    const int nx = std::max(1, static_cast<int>(std::ceil(1.0 / h - 1e-9)));
    const int ny = std::max(1, static_cast<int>(std::ceil(1.0 / (h * std::sqrt(3.0) / 2.0) - 1e-9)));
    std::vector<std::pair<Vec2, bool>> pts;  // (position, on boundary)
    for (int j = 0; j <= ny; ++j) {
        const double y = static_cast<double>(j) / ny;
        const bool edge_row = (j == 0 || j == ny);
        if (j % 2 == 0) {
            for (int i = 0; i <= nx; ++i) {
                const bool bnd = edge_row || i == 0 || i == nx;
                pts.emplace_back(Vec2(static_cast<double>(i) / nx, y), bnd);
            }
        } else {
            pts.emplace_back(Vec2(0.0, y), true);
            for (int i = 0; i < nx; ++i) {
                pts.emplace_back(Vec2((i + 0.5) / nx, y), edge_row);
            }
            pts.emplace_back(Vec2(1.0, y), true);
        }
    }
    return pts;
}

SpaceTimeMesh finalize(const std::vector<Vec2>& points, const std::vector<std::array<int, 3>>& tris,
                       const std::vector<int>& curve_vertex, const std::vector<CurveParam>& params,
                       const Polyline& curve, double h, int n_t) {
    SpaceTimeMesh mesh;
    mesh.vertices = points;
    mesh.triangles = tris;
    mesh.curve = curve;
    mesh.h = h;
    mesh.n_t = n_t;
    mesh.id = next_mesh_id();
    mesh.areas.resize(tris.size());
    std::map<std::pair<int, int>, int> edge_index;
    mesh.triangle_edges.resize(tris.size());
    for (std::size_t t = 0; t < tris.size(); ++t) {
        const auto& v = tris[t];
        mesh.areas[t] = 0.5 * detail::orient2d(points[v[0]], points[v[1]], points[v[2]]);
        for (int k = 0; k < 3; ++k) {
            const int a = std::min(v[(k + 1) % 3], v[(k + 2) % 3]);
            const int b = std::max(v[(k + 1) % 3], v[(k + 2) % 3]);
            auto [it, inserted] = edge_index.try_emplace({a, b}, static_cast<int>(mesh.edges.size()));
            if (inserted) mesh.edges.push_back({a, b});
            mesh.triangle_edges[t][k] = it->second;
        }
    }
    mesh.curve_nodes = curve_vertex;
    mesh.curve_params = params;
    for (int c = 0; c + 1 < static_cast<int>(curve_vertex.size()); ++c) {
        CurveEdge e;
        e.v0 = curve_vertex[c];
        e.v1 = curve_vertex[c + 1];
        e.c0 = c;
        e.c1 = c + 1;
        e.segment = params[c].segment;
        if (params[c].u >= 1.0) e.segment = params[c].segment + 1;  // node at a segment end
        e.forward = e.v0 < e.v1;
        const auto it = edge_index.find({std::min(e.v0, e.v1), std::max(e.v0, e.v1)});
        if (it == edge_index.end()) {
            throw Error(ErrorKind::MeshingFailure, "curve piece is not a mesh edge");
        }
        e.edge = it->second;
        e.length = (points[e.v1] - points[e.v0]).norm();
        mesh.curve_edges.push_back(e);
    }
    return mesh;
}

}  // namespace

SpaceTimeMesh build_mesh(const Polyline& curve, double h, int n_t) {
    if (!(h > 0.0 && h <= 0.5)) throw Error(ErrorKind::MeshingFailure, "mesh size must lie in (0, 0.5]");
    if (n_t < 1) throw Error(ErrorKind::MeshingFailure, "need at least one time slab");
    validate_polyline(curve);
    for (const Vec2& p : curve.points()) {
        if (!(p.x() > 0.0 && p.x() < 1.0 && p.y() > 0.0 && p.y() < 1.0)) {
            throw Error(ErrorKind::MeshingFailure, "curve must lie strictly inside the unit square");
        }
    }

    // Curve pieces of length <= h; nodes carry their polyline parameter.
    std::vector<CurveNode> nodes;
    for (int s = 0; s < curve.n_segments(); ++s) {
        const int m = std::max(1, static_cast<int>(std::ceil(curve.segment_length(s) / h - 1e-9)));
        for (int j = 0; j < m; ++j) {
            const double u = static_cast<double>(j) / m;
            nodes.push_back({(1.0 - u) * curve.point(s) + u * curve.point(s + 1), {s, u}});
        }
    }
    if (curve.n_segments() > 0) {
        nodes.push_back({curve.points().back(), {curve.n_segments() - 1, 1.0}});
    }

    detail::Delaunay dt;
    std::vector<Vec2> points;
    auto add_point = [&](const Vec2& p) {
        const int id = dt.insert(p);
        if (id == static_cast<int>(points.size())) {
            points.push_back(p);
        } else if (id > static_cast<int>(points.size())) {
            throw Error(ErrorKind::MeshingFailure, "vertex numbering out of sync");
        }
        return id;
    };

    const double drop_radius = 0.55 * h;
    for (const auto& [p, on_boundary] : lattice_points(h)) {
        if (!on_boundary) {
            bool near_curve = false;
            for (int s = 0; s < curve.n_segments() && !near_curve; ++s) {
                near_curve = point_segment_distance(p, curve.point(s), curve.point(s + 1)) < drop_radius;
            }
            if (near_curve) continue;
        }
        add_point(p);
    }

    std::vector<int> curve_vertex;
    for (const CurveNode& n : nodes) {
        const int id = add_point(n.pos);
        if (std::find(curve_vertex.begin(), curve_vertex.end(), id) != curve_vertex.end()) {
            throw Error(ErrorKind::MeshingFailure, "curve nodes collapsed onto one vertex");
        }
        curve_vertex.push_back(id);
    }

    // Recover missing curve pieces by splitting, then bisect overlong edges,
    // until both conditions hold.
    const double max_len = h * (1.0 + 1e-9);
    constexpr int kMaxRounds = 200;
    bool done = false;
    for (int round = 0; round < kMaxRounds && !done; ++round) {
        const auto edges = dt.edges();
        auto has_edge = [&edges](int a, int b) {
            return std::binary_search(edges.begin(), edges.end(), std::make_pair(std::min(a, b), std::max(a, b)));
        };
        std::vector<int> missing;
        for (int c = 0; c + 1 < static_cast<int>(curve_vertex.size()); ++c) {
            if (!has_edge(curve_vertex[c], curve_vertex[c + 1])) missing.push_back(c);
        }
        if (!missing.empty()) {
            for (auto it = missing.rbegin(); it != missing.rend(); ++it) {
                const int c = *it;
                CurveNode mid;
                const CurveNode a{points[curve_vertex[c]], nodes[c].param};
                const CurveNode b{points[curve_vertex[c + 1]], nodes[c + 1].param};
                mid.pos = 0.5 * (a.pos + b.pos);
                if (b.param.segment == a.param.segment) {
                    mid.param = {a.param.segment, 0.5 * (a.param.u + b.param.u)};
                } else {
                    mid.param = {a.param.segment, 0.5 * (a.param.u + 1.0)};
                }
                const int id = add_point(mid.pos);
                curve_vertex.insert(curve_vertex.begin() + c + 1, id);
                nodes.insert(nodes.begin() + c + 1, mid);
            }
            continue;
        }
        std::vector<Vec2> splits;
        for (const auto& [a, b] : edges) {
            if ((points[a] - points[b]).norm() > max_len) splits.push_back(0.5 * (points[a] + points[b]));
        }
        if (splits.empty()) {
            done = true;
            break;
        }
        for (const Vec2& p : splits) add_point(p);
    }
    if (!done) throw Error(ErrorKind::MeshingFailure, "constrained refinement did not terminate");

    std::vector<CurveParam> params;
    params.reserve(nodes.size());
    for (const CurveNode& n : nodes) params.push_back(n.param);

    SpaceTimeMesh mesh = finalize(points, dt.triangles(), curve_vertex, params, curve, h, n_t);

    double total_area = 0.0;
    for (double a : mesh.areas) total_area += a;
    if (std::abs(total_area - 1.0) > 1e-9) {
        throw Error(ErrorKind::MeshingFailure, "triangulation does not cover the unit square");
    }
    const double angle = min_angle_degrees(mesh);
    if (angle < kMinAngleDegrees) {
        throw Error(ErrorKind::MeshingFailure,
                    "sliver triangle with minimum angle " + std::to_string(angle) + " degrees");
    }
    return mesh;
}

SpaceTimeMesh remesh(const Polyline& curve, const SpaceTimeMesh& prev) {
    return build_mesh(curve, prev.h, prev.n_t);
}

std::optional<SpaceTimeMesh> deform_mesh(const SpaceTimeMesh& base, const Polyline& curve) {
    if (curve.n_points() != base.curve.n_points()) return std::nullopt;
    if (!check_polyline(curve).ok) return std::nullopt;
    SpaceTimeMesh mesh = base;
    mesh.curve = curve;
    mesh.id = next_mesh_id();
    for (int c = 0; c < base.n_curve_nodes(); ++c) {
        const CurveParam& p = base.curve_params[c];
        const int s = p.segment;
        const Vec2 pos = (p.u >= 1.0) ? curve.point(s + 1)
                                      : (1.0 - p.u) * curve.point(s) + p.u * curve.point(s + 1);
        mesh.vertices[base.curve_nodes[c]] = pos;
    }
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& v = mesh.triangles[t];
        mesh.areas[t] = 0.5 * detail::orient2d(mesh.vertices[v[0]], mesh.vertices[v[1]], mesh.vertices[v[2]]);
        if (!(mesh.areas[t] > 0.0)) return std::nullopt;
    }
    for (CurveEdge& e : mesh.curve_edges) e.length = (mesh.vertices[e.v1] - mesh.vertices[e.v0]).norm();
    if (min_angle_degrees(mesh) < kMinAngleDegrees) return std::nullopt;
    return mesh;
}

double min_angle_degrees(const SpaceTimeMesh& mesh) {
    double best = 180.0;
    for (const auto& t : mesh.triangles) {
        best = std::min(best, triangle_min_angle(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]));
    }
    return best;
}

double max_edge_length(const SpaceTimeMesh& mesh) {
    double best = 0.0;
    for (const auto& e : mesh.edges) best = std::max(best, (mesh.vertices[e[0]] - mesh.vertices[e[1]]).norm());
    return best;
}

}  // namespace prefot
