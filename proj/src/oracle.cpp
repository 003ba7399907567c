#include "prefot/oracle.hpp"

#include "prefot/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace prefot {

double bracketed_root(const std::function<double(double)>& f, double lo, double hi) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) throw Error(ErrorKind::NoBracket, "no sign change on the bracket");
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    // pick the endpoint with the smaller residual
    return std::abs(f(lo)) <= std::abs(f(hi)) ? lo : hi;
}

double cubic_root(double a3, double a2, double a1, double a0, double lo, double hi) {
    return bracketed_root([=](double x) { return ((a3 * x + a2) * x + a1) * x + a0; }, lo, hi);
}

BulkOracle bulk_projection_oracle(double eta_rho, const Vec2& eta_J) {
    const double n = eta_J.norm();
    if (eta_rho + 0.5 * n * n <= 0.0) return {eta_rho, eta_J};
    if (n == 0.0) return {0.0, Vec2::Zero()};
    const double x = cubic_root(1.0, 0.0, 2.0 * (1.0 + eta_rho), -2.0 * n, 0.0, n);
    return {-0.5 * x * x, (x / n) * eta_J};
}

CurveOracle curve_projection_oracle(double eta_mu, double eta_V, double eta_f, double alpha1, double alpha2) {
    using ld = long double;
    const ld a1 = alpha1, a2 = alpha2, v0 = eta_V, w0 = eta_f, m0 = eta_mu;
    auto h = [&](ld l) {
        const ld v = v0 / (1 + l / a1);
        const ld w = w0 / (1 + l / a2);
        return m0 - l + (v * v / a1 + w * w / a2) / 2;
    };
    const ld h0 = h(0);
    if (h0 <= 0) return {eta_mu, eta_V, eta_f};
    ld lo = 0, hi = h0;
    for (int it = 0; it < 300; ++it) {
        const ld mid = (lo + hi) / 2;
        if (mid <= lo || mid >= hi) break;
        (h(mid) > 0 ? lo : hi) = mid;
    }
    const ld l = (lo + hi) / 2;
    const ld v = v0 / (1 + l / a1);
    const ld w = w0 / (1 + l / a2);
    const ld mu = -(v * v / a1 + w * w / a2) / 2;
    return {static_cast<double>(mu), static_cast<double>(v), static_cast<double>(w)};
}

double symmetric_curve_root(double eta_mu, double a, double alpha) {
    const double c = 2.0 * (alpha * alpha + alpha * eta_mu);
    // 2x^3 + c x - 2 alpha^2 a is negative at 0 and positive at a when the
    // input is infeasible
    return cubic_root(2.0, 0.0, c, -2.0 * alpha * alpha * a, 0.0, std::max(a, 1e-300));
}

W2Result w2_squared_lp(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    const int n = static_cast<int>(a.points.size());
    const int m = static_cast<int>(b.points.size());
    if (static_cast<int>(a.weights.size()) != n || static_cast<int>(b.weights.size()) != m) {
        throw Error(ErrorKind::DimensionMismatch, "points and weights differ in length");
    }
    double ma = 0.0, mb = 0.0;
    for (double w : a.weights) {
        if (w < 0.0) throw Error(ErrorKind::Infeasible, "negative weight");
        ma += w;
    }
    for (double w : b.weights) {
        if (w < 0.0) throw Error(ErrorKind::Infeasible, "negative weight");
        mb += w;
    }
    if (std::abs(ma - mb) > 1e-12) throw Error(ErrorKind::Infeasible, "measures carry different total mass");

    std::vector<double> cost(static_cast<std::size_t>(n) * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) cost[i * m + j] = (a.points[i] - b.points[j]).squaredNorm();

    // Successive shortest paths on the bipartite network; node i < n is a
    // supply, node n + j a demand. Forward arcs are uncapacitated, reverse
    // arcs carry the current flow.
    const double eps = 1e-14 * std::max(ma, 1.0);
    std::vector<double> supply(a.weights), demand(b.weights);
    std::vector<double> flow(static_cast<std::size_t>(n) * m, 0.0);
    std::vector<double> pot(n + m, 0.0);
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(n + m);
    std::vector<int> prev(n + m);
    std::vector<char> done(n + m);

    for (int round = 0; round < 100 * (n + m) + 100; ++round) {
        bool any = false;
        for (int j = 0; j < m; ++j) any = any || demand[j] > eps;
        bool sources = false;
        for (int i = 0; i < n; ++i) sources = sources || supply[i] > eps;
        if (!any || !sources) break;
        std::fill(dist.begin(), dist.end(), inf);
        std::fill(prev.begin(), prev.end(), -1);
        std::fill(done.begin(), done.end(), 0);
        for (int i = 0; i < n; ++i)
            if (supply[i] > eps) dist[i] = 0.0;
        int target = -1;
        for (;;) {
            int u = -1;
            for (int v = 0; v < n + m; ++v)
                if (!done[v] && dist[v] < inf && (u < 0 || dist[v] < dist[u])) u = v;
            if (u < 0) break;
            done[u] = 1;
            if (u >= n && demand[u - n] > eps) {
                target = u;
                break;
            }
            if (u < n) {
                for (int j = 0; j < m; ++j) {
                    const double rc = cost[u * m + j] + pot[u] - pot[n + j];
                    const double nd = dist[u] + std::max(rc, 0.0);
                    if (nd < dist[n + j]) {
                        dist[n + j] = nd;
                        prev[n + j] = u;
                    }
                }
            } else {
                const int j = u - n;
                for (int i = 0; i < n; ++i) {
                    if (flow[i * m + j] <= 0.0) continue;
                    const double rc = -cost[i * m + j] + pot[u] - pot[i];
                    const double nd = dist[u] + std::max(rc, 0.0);
                    if (nd < dist[i]) {
                        dist[i] = nd;
                        prev[i] = u;
                    }
                }
            }
        }
        if (target < 0) throw Error(ErrorKind::Infeasible, "no augmenting path");
        const double dt = dist[target];
        for (int v = 0; v < n + m; ++v) pot[v] += std::min(dist[v], dt);

        // bottleneck along the path back to a source
        double amount = demand[target - n];
        int v = target;
        while (prev[v] >= 0) {
            const int u = prev[v];
            if (u >= n) amount = std::min(amount, flow[v * m + (u - n)]);  // reverse arc u -> v
            v = u;
        }
        amount = std::min(amount, supply[v]);
        const int source = v;
        v = target;
        while (prev[v] >= 0) {
            const int u = prev[v];
            if (u < n) flow[u * m + (v - n)] += amount;
            else flow[v * m + (u - n)] -= amount;
            v = u;
        }
        supply[source] -= amount;
        demand[target - n] -= amount;
    }

    W2Result out;
    double gap_violation = 0.0;
    double neg_reduced = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            const double rc = cost[i * m + j] + pot[i] - pot[n + j];
            neg_reduced = std::max(neg_reduced, -rc);
            const double f = flow[i * m + j];
            if (f > eps) {
                out.cost += f * cost[i * m + j];
                out.plan.push_back({i, j, f});
                gap_violation = std::max(gap_violation, std::abs(rc));
            }
        }
    }
    // u_i = -pot_i and v_j = pot_j satisfy u_i + v_j <= c_ij
    for (int i = 0; i < n; ++i) out.dual_cost -= a.weights[i] * pot[i];
    for (int j = 0; j < m; ++j) out.dual_cost += b.weights[j] * pot[n + j];
    double unmet = 0.0;
    for (int j = 0; j < m; ++j) unmet += std::abs(demand[j]);
    out.certificate = std::max({std::abs(out.cost - out.dual_cost), neg_reduced, unmet});
    return out;
}

DiscreteMeasure atomize(const SpaceTimeMesh& mesh, const Eigen::VectorXd& bulk, const Eigen::VectorXd& curve,
                        int atoms_per_axis) {
    const int na = atoms_per_axis;
    if (na < 1) throw Error(ErrorKind::ValidationError, "atoms_per_axis must be positive");
    std::vector<double> mass(static_cast<std::size_t>(na) * na, 0.0);
    std::vector<Vec2> moment(mass.size(), Vec2::Zero());
    auto deposit = [&](const Vec2& p, double w) {
        const int i = std::clamp(static_cast<int>(p.x() * na), 0, na - 1);
        const int j = std::clamp(static_cast<int>(p.y() * na), 0, na - 1);
        mass[j * na + i] += w;
        moment[j * na + i] += w * p;
    };
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto& v = mesh.triangles[t];
        const double w = mesh.areas[t] / 3.0 * (bulk[v[0]] + bulk[v[1]] + bulk[v[2]]);
        if (w > 0.0) deposit(mesh.barycenter(t), w);
    }
    if (curve.size() > 0) {
        for (const CurveEdge& e : mesh.curve_edges) {
            const double w = 0.5 * e.length * (curve[e.c0] + curve[e.c1]);
            if (w > 0.0) deposit(0.5 * (mesh.vertices[e.v0] + mesh.vertices[e.v1]), w);
        }
    }
    double total = 0.0;
    for (double w : mass) total += w;
    if (!(total > 0.0)) throw Error(ErrorKind::ZeroMass, "nothing to atomize");
    DiscreteMeasure out;
    for (std::size_t c = 0; c < mass.size(); ++c) {
        if (mass[c] <= 0.0) continue;
        out.points.push_back(moment[c] / mass[c]);
        out.weights.push_back(mass[c] / total);
    }
    return out;
}

MassReport check_mass_conservation(const PrimalState& state, const SpaceTimeMesh& mesh, const BoundaryData& data) {
    MassReport r;
    r.reference = bulk_mass(mesh, data.rho0) + (data.mu0.size() > 0 ? curve_mass(mesh, data.mu0) : 0.0);
    for (int k = 0; k < mesh.n_t; ++k) {
        double m = 0.0;
        for (int t = 0; t < mesh.n_triangles(); ++t) m += state.rho[mesh.bulk_prism(k, t)] * mesh.areas[t];
        for (int e = 0; e < mesh.n_curve_edges(); ++e)
            m += state.mu[mesh.curve_prism(k, e)] * mesh.curve_edges[e].length;
        r.slab_mass.push_back(m);
        r.max_deviation = std::max(r.max_deviation, std::abs(m - 1.0));
    }
    return r;
}

}  // namespace prefot
