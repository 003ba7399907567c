#include <doctest.h>

#include "prefot/errors.hpp"
#include "prefot/geometry.hpp"

#include <cmath>
#include <map>

using namespace prefot;

namespace {

Polyline u_curve() {
    return Polyline({Vec2(0.3, 0.7), Vec2(0.4, 0.3), Vec2(0.6, 0.3), Vec2(0.7, 0.7)});
}

double total_area(const SpaceTimeMesh& m) {
    double a = 0.0;
    for (double x : m.areas) a += x;
    return a;
}

// Interior edges are shared by two triangles, boundary edges by one.
void check_conformity(const SpaceTimeMesh& m) {
    std::map<int, int> uses;
    for (const auto& te : m.triangle_edges)
        for (int e : te) ++uses[e];
    for (int e = 0; e < static_cast<int>(m.edges.size()); ++e) {
        const Vec2& a = m.vertices[m.edges[e][0]];
        const Vec2& b = m.vertices[m.edges[e][1]];
        auto on_side = [](double u, double v) {
            return (std::abs(u) < 1e-14 && std::abs(v) < 1e-14) ||
                   (std::abs(u - 1) < 1e-14 && std::abs(v - 1) < 1e-14);
        };
        const bool boundary = on_side(a.x(), b.x()) || on_side(a.y(), b.y());
        CHECK(uses[e] == (boundary ? 1 : 2));
    }
    for (double area : m.areas) CHECK(area > 0.0);
    CHECK(total_area(m) == doctest::Approx(1.0).epsilon(1e-12));
}

}  // namespace

TEST_CASE("empty curve gives a plain square mesh") {
    const SpaceTimeMesh m = build_mesh(Polyline(), 0.5, 2);
    CHECK(m.n_triangles() >= 8);
    CHECK(m.n_t == 2);
    CHECK(m.curve_edges.empty());
    CHECK(max_edge_length(m) <= 0.5 + 1e-12);
    check_conformity(m);
}

TEST_CASE("u-curve is covered by mesh edge chains") {
    const Polyline c = u_curve();
    const SpaceTimeMesh m = build_mesh(c, 0.02, 50);
    check_conformity(m);
    CHECK(max_edge_length(m) <= 0.02 * (1 + 1e-9));
    CHECK(min_angle_degrees(m) > 15.0);
    std::vector<double> per_segment(c.n_segments(), 0.0);
    for (const CurveEdge& e : m.curve_edges) {
        per_segment[e.segment] += e.length;
        CHECK(e.length <= 0.02 * (1 + 1e-9));
        // the curve edge is a genuine mesh edge
        const auto& edge = m.edges[e.edge];
        CHECK(std::min(e.v0, e.v1) == edge[0]);
        CHECK(std::max(e.v0, e.v1) == edge[1]);
    }
    for (int s = 0; s < c.n_segments(); ++s) {
        CHECK(std::abs(per_segment[s] - c.segment_length(s)) <= 1e-12 * c.segment_length(s));
    }
    CHECK(m.vertices[m.curve_nodes.front()] == c.point(0));
    CHECK(m.vertices[m.curve_nodes.back()] == c.point(3));
    // chain is contiguous and follows the curve direction
    for (int i = 0; i + 1 < m.n_curve_edges(); ++i) CHECK(m.curve_edges[i].v1 == m.curve_edges[i + 1].v0);
    const auto s = m.curve_arclength();
    CHECK(s.back() == doctest::Approx(c.length()).epsilon(1e-12));
}

TEST_CASE("polyline validation") {
    CHECK_THROWS_AS(build_mesh(Polyline({Vec2(0.5, 0.5), Vec2(0.5, 0.5)}), 0.1, 2), Error);
    try {
        validate_polyline(Polyline({Vec2(0.5, 0.5), Vec2(0.5, 0.5)}));
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::CurveSelfIntersection);
    }
    // crossing figure
    const Polyline cross({Vec2(0.2, 0.2), Vec2(0.8, 0.8), Vec2(0.8, 0.2), Vec2(0.2, 0.8)});
    CHECK_FALSE(check_polyline(cross).ok);
    // fold-back
    const Polyline fold({Vec2(0.2, 0.5), Vec2(0.8, 0.5), Vec2(0.5, 0.5)});
    CHECK_FALSE(check_polyline(fold).ok);
    // touching at a vertex of non-adjacent segments
    const Polyline touch({Vec2(0.2, 0.2), Vec2(0.6, 0.2), Vec2(0.6, 0.6), Vec2(0.4, 0.2)});
    CHECK_FALSE(check_polyline(touch).ok);
    CHECK(check_polyline(u_curve()).ok);
}

TEST_CASE("project_box clamps componentwise") {
    const Polyline p({Vec2(0.5, 0.5), Vec2(-0.2, 1.3), Vec2(0.05, 0.5)});
    const Polyline q = project_box(p, 0.05);
    CHECK(q.point(0) == Vec2(0.5, 0.5));
    CHECK(q.point(1) == Vec2(0.05, 0.95));
    CHECK(q.point(2) == Vec2(0.05, 0.5));
    const Polyline r = project_box(q, 0.05);
    for (int i = 0; i < 3; ++i) CHECK(r.point(i) == q.point(i));
}

TEST_CASE("remesh keeps curve topology and accepts rigid motions") {
    const Polyline c = u_curve();
    const SpaceTimeMesh a = build_mesh(c, 0.05, 5);
    const SpaceTimeMesh b = remesh(c, a);
    REQUIRE(a.n_curve_edges() == b.n_curve_edges());
    for (int i = 0; i < a.n_curve_edges(); ++i) {
        CHECK(a.curve_edges[i].segment == b.curve_edges[i].segment);
        CHECK(a.curve_edges[i].length == b.curve_edges[i].length);
    }
    CHECK(a.n_triangles() == b.n_triangles());
    CHECK(b.h == a.h);
    CHECK(b.n_t == a.n_t);

    std::vector<Vec2> pts = c.points();
    for (Vec2& p : pts) p.x() += 0.01;
    const SpaceTimeMesh t = remesh(Polyline(pts), a);
    check_conformity(t);
    CHECK(t.curve.n_segments() == c.n_segments());

    // out-of-bounds step, then projection
    std::vector<Vec2> wild = c.points();
    wild[0] = Vec2(-0.1, 0.9);
    const SpaceTimeMesh w = remesh(project_box(Polyline(wild), 0.05), a);
    check_conformity(w);
}

TEST_CASE("mesh is mirror symmetric for a symmetric curve") {
    const SpaceTimeMesh m = build_mesh(u_curve(), 0.05, 1);
    int matched = 0;
    for (const Vec2& v : m.vertices) {
        const Vec2 mirror(1.0 - v.x(), v.y());
        for (const Vec2& w : m.vertices) {
            if ((w - mirror).norm() < 1e-12) {
                ++matched;
                break;
            }
        }
    }
    CHECK(matched == m.n_vertices());
}

TEST_CASE("deform_mesh moves curve nodes along the new polyline") {
    const Polyline c = u_curve();
    const SpaceTimeMesh base = build_mesh(c, 0.05, 3);
    std::vector<Vec2> pts = c.points();
    pts[1].y() += 1e-4;
    const auto moved = deform_mesh(base, Polyline(pts));
    REQUIRE(moved.has_value());
    CHECK(moved->n_triangles() == base.n_triangles());
    CHECK(moved->vertices[moved->curve_nodes[0]] == pts[0]);
    CHECK(total_area(*moved) == doctest::Approx(1.0).epsilon(1e-12));
    double len = 0.0;
    for (const CurveEdge& e : moved->curve_edges) len += e.length;
    CHECK(len == doctest::Approx(Polyline(pts).length()).epsilon(1e-12));
    CHECK(moved->id != base.id);

    // a large move inverts triangles and is refused
    pts[1] = Vec2(0.9, 0.9);
    CHECK_FALSE(deform_mesh(base, Polyline(pts)).has_value());
}

TEST_CASE("curve endpoints must be strictly inside the square") {
    CHECK_THROWS_AS(build_mesh(Polyline({Vec2(0.0, 0.5), Vec2(0.5, 0.5)}), 0.1, 1), Error);
}

TEST_CASE("reference meshes build at several resolutions") {
    const Polyline line({Vec2(0.05, 0.5), Vec2(0.5, 0.5), Vec2(0.95, 0.5)});
    for (double h : {0.1, 0.05, 0.025}) {
        const SpaceTimeMesh m = build_mesh(line, h, 2);
        check_conformity(m);
        CHECK(min_angle_degrees(m) > 10.0);
    }
    const Polyline slanted({Vec2(0.07, 0.43), Vec2(0.52, 0.49), Vec2(0.93, 0.61)});
    const SpaceTimeMesh m = build_mesh(slanted, 0.1, 2);
    check_conformity(m);
}
