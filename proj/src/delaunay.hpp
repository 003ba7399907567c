#pragma once

// Incremental Bowyer-Watson triangulation used by the mesher. Internal to
// the library.

#include "prefot/geometry.hpp"

#include <array>
#include <utility>
#include <vector>

namespace prefot::detail {

class Delaunay {
public:
    /// All inserted points must lie well inside the square [-1, 2]^2.
    Delaunay();

    /// Returns the id of the inserted vertex (or of a coincident existing one).
    int insert(const Vec2& p);

    int n_points() const { return static_cast<int>(pts_.size()) - 3; }
    const Vec2& point(int id) const { return pts_[id + 3]; }

    /// Triangles not touching the enclosing super-triangle, counter-clockwise,
    /// with vertex ids as returned by insert().
    std::vector<std::array<int, 3>> triangles() const;

    /// Sorted list of undirected edges (a < b) between real vertices.
    std::vector<std::pair<int, int>> edges() const;

private:
    struct Tri {
        std::array<int, 3> v;
        std::array<int, 3> n;  // neighbour across the edge opposite v[k]
        bool alive = true;
    };

    int locate(const Vec2& p) const;
    bool in_circle(const Tri& t, const Vec2& p) const;

    std::vector<Vec2> pts_;
    std::vector<Tri> tris_;
    mutable int last_ = 0;
};

double orient2d(const Vec2& a, const Vec2& b, const Vec2& c);

}  // namespace prefot::detail
