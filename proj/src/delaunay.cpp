#include "delaunay.hpp"

#include "prefot/errors.hpp"

#include <algorithm>
#include <cmath>

namespace prefot::detail {

namespace {

constexpr double kOrientTol = 1e-13;
constexpr double kCircleTol = 1e-11;
constexpr double kCoincident = 1e-13;

// Sign of orient2d with a relative dead zone; 0 means "numerically collinear".
int orient_sign(const Vec2& a, const Vec2& b, const Vec2& c) {
    const double l = (b.x() - a.x()) * (c.y() - a.y());
    const double r = (b.y() - a.y()) * (c.x() - a.x());
    const double det = l - r;
    const double bound = kOrientTol * (std::abs(l) + std::abs(r));
    if (det > bound) return 1;
    if (det < -bound) return -1;
    return 0;
}

}  // namespace

double orient2d(const Vec2& a, const Vec2& b, const Vec2& c) {
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

Delaunay::Delaunay() {
    pts_ = {Vec2(-100.0, -100.0), Vec2(100.0, -100.0), Vec2(0.5, 100.0)};
    tris_.push_back(Tri{{0, 1, 2}, {-1, -1, -1}, true});
}

bool Delaunay::in_circle(const Tri& t, const Vec2& p) const {
    const Vec2& a = pts_[t.v[0]];
    const Vec2& b = pts_[t.v[1]];
    const Vec2& c = pts_[t.v[2]];
    const double adx = a.x() - p.x(), ady = a.y() - p.y();
    const double bdx = b.x() - p.x(), bdy = b.y() - p.y();
    const double cdx = c.x() - p.x(), cdy = c.y() - p.y();
    const double alift = adx * adx + ady * ady;
    const double blift = bdx * bdx + bdy * bdy;
    const double clift = cdx * cdx + cdy * cdy;
    const double det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
                       clift * (adx * bdy - bdx * ady);
    const double perm = alift * (std::abs(bdx * cdy) + std::abs(cdx * bdy)) +
                        blift * (std::abs(cdx * ady) + std::abs(adx * cdy)) +
                        clift * (std::abs(adx * bdy) + std::abs(bdx * ady));
    return det > kCircleTol * perm;
}

int Delaunay::locate(const Vec2& p) const {
    int t = last_;
    if (t < 0 || t >= static_cast<int>(tris_.size()) || !tris_[t].alive) {
        t = -1;
        for (int i = static_cast<int>(tris_.size()) - 1; i >= 0; --i) {
            if (tris_[i].alive) {
                t = i;
                break;
            }
        }
    }
    const int max_steps = 4 * static_cast<int>(tris_.size()) + 16;
    for (int step = 0; step < max_steps && t >= 0; ++step) {
        const Tri& tri = tris_[t];
        int next = -2;
        for (int k = 0; k < 3; ++k) {
            const Vec2& a = pts_[tri.v[(k + 1) % 3]];
            const Vec2& b = pts_[tri.v[(k + 2) % 3]];
            if (orient_sign(a, b, p) < 0) {
                next = tri.n[k];
                break;
            }
        }
        if (next == -2) return t;
        t = next;
    }
    // The walk can cycle on near-degenerate input; fall back to a scan.
    for (int i = 0; i < static_cast<int>(tris_.size()); ++i) {
        const Tri& tri = tris_[i];
        if (!tri.alive) continue;
        bool inside = true;
        for (int k = 0; k < 3 && inside; ++k) {
            inside = orient_sign(pts_[tri.v[(k + 1) % 3]], pts_[tri.v[(k + 2) % 3]], p) >= 0;
        }
        if (inside) return i;
    }
    throw Error(ErrorKind::MeshingFailure, "point location failed");
}

int Delaunay::insert(const Vec2& p) {
    const int t0 = locate(p);
    for (int k = 0; k < 3; ++k) {
        const int v = tris_[t0].v[k];
        if ((pts_[v] - p).norm() < kCoincident) return v - 3;
    }

    const int pid = static_cast<int>(pts_.size());
    pts_.push_back(p);

    std::vector<int> cavity{t0};
    std::vector<char> in_cavity(tris_.size(), 0);
    in_cavity[t0] = 1;
    for (std::size_t i = 0; i < cavity.size(); ++i) {
        const Tri& t = tris_[cavity[i]];
        for (int k = 0; k < 3; ++k) {
            const int nb = t.n[k];
            if (nb < 0 || in_cavity[nb]) continue;
            if (in_circle(tris_[nb], p)) {
                in_cavity[nb] = 1;
                cavity.push_back(nb);
            }
        }
    }

    // The cavity must be star-shaped from p; grow it across any boundary
    // edge that p does not strictly see.
    for (bool grown = true; grown;) {
        grown = false;
        for (std::size_t i = 0; i < cavity.size(); ++i) {
            const Tri& t = tris_[cavity[i]];
            for (int k = 0; k < 3; ++k) {
                const int nb = t.n[k];
                if (nb >= 0 && in_cavity[nb]) continue;
                const Vec2& a = pts_[t.v[(k + 1) % 3]];
                const Vec2& b = pts_[t.v[(k + 2) % 3]];
                if (orient_sign(a, b, p) > 0) continue;
                if (nb < 0) throw Error(ErrorKind::MeshingFailure, "point outside triangulation");
                in_cavity[nb] = 1;
                cavity.push_back(nb);
                grown = true;
            }
        }
    }

    struct Boundary {
        int a, b, outer, old;
    };
    std::vector<Boundary> boundary;
    for (int ti : cavity) {
        const Tri& t = tris_[ti];
        for (int k = 0; k < 3; ++k) {
            const int nb = t.n[k];
            if (nb >= 0 && in_cavity[nb]) continue;
            boundary.push_back({t.v[(k + 1) % 3], t.v[(k + 2) % 3], nb, ti});
        }
    }

    const int first_new = static_cast<int>(tris_.size());
    for (const Boundary& e : boundary) {
        const int id = static_cast<int>(tris_.size());
        tris_.push_back(Tri{{e.a, e.b, pid}, {-1, -1, e.outer}, true});
        if (e.outer >= 0) {
            Tri& o = tris_[e.outer];
            for (int k = 0; k < 3; ++k) {
                if (o.n[k] == e.old) {
                    const int oa = o.v[(k + 1) % 3];
                    const int ob = o.v[(k + 2) % 3];
                    if ((oa == e.b && ob == e.a)) o.n[k] = id;
                }
            }
        }
    }
    const int n_new = static_cast<int>(boundary.size());
    for (int i = 0; i < n_new; ++i) {
        Tri& t = tris_[first_new + i];
        const int a = t.v[0];
        const int b = t.v[1];
        for (int j = 0; j < n_new; ++j) {
            if (j == i) continue;
            const Tri& s = tris_[first_new + j];
            if (s.v[0] == b) t.n[0] = first_new + j;  // shares edge (b, p)
            if (s.v[1] == a) t.n[1] = first_new + j;  // shares edge (p, a)
        }
    }
    for (int ti : cavity) tris_[ti].alive = false;
    last_ = first_new;
    return pid - 3;
}

std::vector<std::array<int, 3>> Delaunay::triangles() const {
    std::vector<std::array<int, 3>> out;
    for (const Tri& t : tris_) {
        if (!t.alive) continue;
        if (t.v[0] < 3 || t.v[1] < 3 || t.v[2] < 3) continue;
        out.push_back({t.v[0] - 3, t.v[1] - 3, t.v[2] - 3});
    }
    return out;
}

std::vector<std::pair<int, int>> Delaunay::edges() const {
    std::vector<std::pair<int, int>> out;
    for (const auto& t : triangles()) {
        for (int k = 0; k < 3; ++k) {
            const int a = t[k];
            const int b = t[(k + 1) % 3];
            out.emplace_back(std::min(a, b), std::max(a, b));
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace prefot::detail
