#include "prefot/transport.hpp"

#include "prefot/dualproj.hpp"
#include "prefot/errors.hpp"

#include <algorithm>
#include <cmath>

namespace prefot {

namespace {

double gaussian_sum(const std::vector<Bump>& bumps, const Vec2& p) {
    double s = 0.0;
    for (const Bump& b : bumps) {
        const double dx = p.x() - b.mx;
        const double dy = p.y() - b.my;
        s += b.weight * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
    }
    return s;
}

void validate_end(const EndSpec& end, const char* which) {
    if (end.bumps.empty()) throw Error(ErrorKind::ValidationError, std::string(which) + " data has no bumps");
    for (const Bump& b : end.bumps) {
        if (!(b.sigma > 0.0)) throw Error(ErrorKind::ValidationError, std::string(which) + " bump sigma must be positive");
        if (!(b.weight > 0.0)) throw Error(ErrorKind::ValidationError, std::string(which) + " bump weight must be positive");
    }
}

void sample_end(const EndSpec& end, const SpaceTimeMesh& mesh, double width, Eigen::VectorXd& bulk,
                Eigen::VectorXd& curve, const char* which) {
    validate_end(end, which);
    bulk = Eigen::VectorXd::Zero(mesh.n_vertices());
    curve = Eigen::VectorXd::Zero(mesh.n_curve_nodes());
    if (end.support != Support::Curve) {
        for (int v = 0; v < mesh.n_vertices(); ++v) bulk[v] = gaussian_sum(end.bumps, mesh.vertices[v]);
    }
    if (end.support != Support::Bulk) {
        for (int c = 0; c < mesh.n_curve_nodes(); ++c) curve[c] = width * gaussian_sum(end.bumps, mesh.vertices[mesh.curve_nodes[c]]);
    }
    const double total = bulk_mass(mesh, bulk) + curve_mass(mesh, curve);
    if (!(total > 1e-300) || !std::isfinite(total)) {
        throw Error(ErrorKind::ZeroMass, std::string(which) + " density has no mass on this mesh");
    }
    bulk /= total;
    curve /= total;
}

double psi(double u, double v) {
    if (u > 0.0) return v * v / (2.0 * u);
    return std::abs(v) <= kVacuumTol ? 0.0 : std::numeric_limits<double>::infinity();
}

double mobility_integrand(const Mobility& mob, double z, double w) {
    if (!(z >= mob.lo && z <= mob.hi)) return std::numeric_limits<double>::infinity();
    const double m = mob.m(z);
    if (m > 0.0) return w * w / m;
    return std::abs(w) <= kVacuumTol ? 0.0 : std::numeric_limits<double>::infinity();
}

// Nearest-point lookup on a uniform bucket grid over the unit square.
class PointGrid {
public:
    explicit PointGrid(std::vector<Vec2> pts) : pts_(std::move(pts)) {
        n_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(pts_.size()) / 2.0)));
        cells_.assign(static_cast<std::size_t>(n_) * n_, {});
        for (int i = 0; i < static_cast<int>(pts_.size()); ++i) cells_[cell(pts_[i])].push_back(i);
    }

    int nearest(const Vec2& p) const {
        if (pts_.empty()) return -1;
        const int ci = clampi(static_cast<int>(p.x() * n_));
        const int cj = clampi(static_cast<int>(p.y() * n_));
        int best = -1;
        double bd = std::numeric_limits<double>::infinity();
        for (int ring = 0; ring <= n_; ++ring) {
            for (int j = cj - ring; j <= cj + ring; ++j) {
                for (int i = ci - ring; i <= ci + ring; ++i) {
                    if (std::max(std::abs(i - ci), std::abs(j - cj)) != ring) continue;
                    if (i < 0 || j < 0 || i >= n_ || j >= n_) continue;
                    for (int id : cells_[j * n_ + i]) {
                        const double d = (pts_[id] - p).squaredNorm();
                        if (d < bd || (d == bd && id < best)) {
                            bd = d;
                            best = id;
                        }
                    }
                }
            }
            // every unvisited cell is at least `ring` cell widths away
            const double reach = static_cast<double>(ring) / n_;
            if (best >= 0 && reach * reach >= bd) break;
        }
        return best;
    }

private:
    int clampi(int i) const { return std::clamp(i, 0, n_ - 1); }
    int cell(const Vec2& p) const { return clampi(static_cast<int>(p.y() * n_)) * n_ + clampi(static_cast<int>(p.x() * n_)); }

    std::vector<Vec2> pts_;
    std::vector<std::vector<int>> cells_;
    int n_ = 1;
};

std::vector<int> bulk_map(const SpaceTimeMesh& from, const SpaceTimeMesh& to) {
    std::vector<Vec2> bc(from.n_triangles());
    for (int t = 0; t < from.n_triangles(); ++t) bc[t] = from.barycenter(t);
    const PointGrid grid(std::move(bc));
    std::vector<int> map(to.n_triangles());
    for (int t = 0; t < to.n_triangles(); ++t) map[t] = grid.nearest(to.barycenter(t));
    return map;
}

std::vector<int> curve_map(const SpaceTimeMesh& from, const SpaceTimeMesh& to) {
    std::vector<int> map(to.n_curve_edges(), -1);
    if (!from.has_curve()) return map;
    std::vector<Vec2> mids(from.n_curve_edges());
    for (int e = 0; e < from.n_curve_edges(); ++e) {
        mids[e] = 0.5 * (from.vertices[from.curve_edges[e].v0] + from.vertices[from.curve_edges[e].v1]);
    }
    const PointGrid grid(std::move(mids));
    for (int e = 0; e < to.n_curve_edges(); ++e) {
        map[e] = grid.nearest(0.5 * (to.vertices[to.curve_edges[e].v0] + to.vertices[to.curve_edges[e].v1]));
    }
    return map;
}

Eigen::VectorXd inject(const Eigen::VectorXd& src, const std::vector<int>& map, int n_src, int n_t) {
    const int n_dst = static_cast<int>(map.size());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_dst) * n_t);
    for (int k = 0; k < n_t; ++k)
        for (int i = 0; i < n_dst; ++i)
            if (map[i] >= 0) out[k * n_dst + i] = src[k * n_src + map[i]];
    return out;
}

}  // namespace

BoundaryData make_boundary_data(const DataSpec& spec, const SpaceTimeMesh& mesh) {
    if (!(spec.curve_width >= 0.0) || !std::isfinite(spec.curve_width)) {
        throw Error(ErrorKind::ValidationError, "curve_width must be nonnegative");
    }
    const double width = spec.curve_width > 0.0 ? spec.curve_width : mesh.h;
    BoundaryData d;
    sample_end(spec.initial, mesh, width, d.rho0, d.mu0, "initial");
    sample_end(spec.final, mesh, width, d.rho1, d.mu1, "final");
    d.mesh_id = mesh.id;
    return d;
}

StepErrors alg_step(const SpaceTimeMesh& mesh, const SaddleSystem& system, const BoundaryData& data,
                    const TransportConfig& cfg, PrimalState& state, DualState& duals) {
    if (system.mesh_id != mesh.id) throw Error(ErrorKind::DimensionMismatch, "system assembled on another mesh");
    const double r1 = cfg.r1;
    const double r2 = cfg.r2;
    const Eigen::VectorXd rhs = assemble_rhs(mesh, state, duals, data, r1, r2);
    Potentials pot = solve_potentials(system, rhs);
    duals.phi = std::move(pot.phi);
    duals.phi1d = std::move(pot.phi1d);
    const PrismDerivatives d = prism_derivatives(mesh, duals.phi, duals.phi1d);

    StepErrors err;
    err.solve_residual = pot.residual;
    for (int p = 0; p < mesh.n_bulk_prisms(); ++p) {
        const Vec2 grad(d.gx_phi[p], d.gy_phi[p]);
        const BulkProjection q = project_bulk(d.dt_phi[p] + state.rho[p] / r1,
                                              grad + Vec2(state.Jx[p], state.Jy[p]) / r1, cfg.projection_tol);
        duals.rho_s[p] = q.rho;
        duals.Jx_s[p] = q.J.x();
        duals.Jy_s[p] = q.J.y();
        const double e_rho = d.dt_phi[p] - q.rho;
        const Vec2 e_J = grad - q.J;
        state.rho[p] += r1 * e_rho;
        state.Jx[p] += r1 * e_J.x();
        state.Jy[p] += r1 * e_J.y();
        err.err_omega = std::max({err.err_omega, std::abs(e_rho), e_J.norm()});
    }
    for (int p = 0; p < mesh.n_curve_prisms(); ++p) {
        const CurveProjection q = project_curve(d.dt_phi1d[p] + state.mu[p] / r2, d.ds_phi1d[p] + state.V[p] / r2,
                                                d.jump[p] + state.f[p] / r2, cfg.alpha1, cfg.alpha2,
                                                cfg.projection_tol);
        duals.mu_s[p] = q.mu;
        duals.V_s[p] = q.V;
        duals.f_s[p] = q.f;
        const double e_mu = d.dt_phi1d[p] - q.mu;
        const double e_V = d.ds_phi1d[p] - q.V;
        const double e_f = d.jump[p] - q.f;
        state.mu[p] += r2 * e_mu;
        state.V[p] += r2 * e_V;
        state.f[p] += r2 * e_f;
        err.err_gamma = std::max({err.err_gamma, std::abs(e_mu), std::abs(e_V), std::abs(e_f)});
    }
    return err;
}

ActionValue discrete_action(const PrimalState& state, const SpaceTimeMesh& mesh, double alpha1, double alpha2) {
    ActionValue a;
    const double dt = mesh.dt();
    for (int k = 0; k < mesh.n_t; ++k) {
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const int p = mesh.bulk_prism(k, t);
            const double v = psi(state.rho[p], std::hypot(state.Jx[p], state.Jy[p]));
            if (std::isinf(v)) ++a.flagged_cells;
            else a.bulk += v * mesh.areas[t] * dt;
        }
        for (int e = 0; e < mesh.n_curve_edges(); ++e) {
            const int p = mesh.curve_prism(k, e);
            const double w = mesh.curve_edges[e].length * dt;
            const double v1 = psi(state.mu[p], state.V[p]);
            const double v2 = psi(state.mu[p], state.f[p]);
            if (std::isinf(v1) || std::isinf(v2)) ++a.flagged_cells;
            if (!std::isinf(v1)) a.curve_V += alpha1 * v1 * w;
            if (!std::isinf(v2)) a.curve_f += alpha2 * v2 * w;
        }
    }
    a.infinite = a.flagged_cells > 0;
    a.value = a.infinite ? std::numeric_limits<double>::infinity() : a.bulk + a.curve_V + a.curve_f;
    return a;
}

Mobility Mobility::linear() {
    return Mobility{[](double z) { return z; }, 0.0, std::numeric_limits<double>::infinity()};
}

ActionValue evaluate_mobility_action(const PrimalState& state, const SpaceTimeMesh& mesh, const Mobility& bulk,
                                     const Mobility& curve, double alpha1, double alpha2) {
    ActionValue a;
    const double dt = mesh.dt();
    for (int k = 0; k < mesh.n_t; ++k) {
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const int p = mesh.bulk_prism(k, t);
            const double v = mobility_integrand(bulk, state.rho[p], std::hypot(state.Jx[p], state.Jy[p]));
            if (std::isinf(v)) ++a.flagged_cells;
            else a.bulk += v * mesh.areas[t] * dt;
        }
        for (int e = 0; e < mesh.n_curve_edges(); ++e) {
            const int p = mesh.curve_prism(k, e);
            const double w = mesh.curve_edges[e].length * dt;
            const double v1 = mobility_integrand(curve, state.mu[p], state.V[p]);
            const double v2 = mobility_integrand(curve, state.mu[p], state.f[p]);
            if (std::isinf(v1) || std::isinf(v2)) ++a.flagged_cells;
            if (!std::isinf(v1)) a.curve_V += alpha1 * v1 * w;
            if (!std::isinf(v2)) a.curve_f += alpha2 * v2 * w;
        }
    }
    a.infinite = a.flagged_cells > 0;
    a.value = a.infinite ? std::numeric_limits<double>::infinity() : a.bulk + a.curve_V + a.curve_f;
    return a;
}

SolveReport run_alg(const SpaceTimeMesh& mesh, const SaddleSystem& system, const BoundaryData& data,
                    const TransportConfig& cfg, PrimalState& state, DualState& duals, int max_iters,
                    bool record_trace) {
    SolveReport rep;
    for (int it = 0; it < max_iters; ++it) {
        const StepErrors e = alg_step(mesh, system, data, cfg, state, duals);
        rep.iterations = it + 1;
        rep.err_alg = e.err_omega + e.err_gamma;
        if (!std::isfinite(rep.err_alg)) throw Error(ErrorKind::SolverStagnation, "error metric is not finite");
        if (record_trace) {
            const ActionValue a = discrete_action(state, mesh, cfg.alpha1, cfg.alpha2);
            rep.trace.push_back({rep.iterations, e.err_omega, e.err_gamma, a.value});
        }
        if (rep.err_alg <= cfg.tol) {
            rep.converged = true;
            break;
        }
    }
    rep.stop_reason = rep.converged ? "tolerance reached" : "iteration cap reached";
    rep.action = discrete_action(state, mesh, cfg.alpha1, cfg.alpha2);
    return rep;
}

PrimalState interpolated_state(const SpaceTimeMesh& mesh, const BoundaryData& data) {
    PrimalState s = PrimalState::zeros(mesh);
    for (int k = 0; k < mesh.n_t; ++k) {
        const double t = (k + 0.5) / mesh.n_t;
        for (int tri = 0; tri < mesh.n_triangles(); ++tri) {
            double a = 0.0, b = 0.0;
            for (int v : mesh.triangles[tri]) {
                a += data.rho0[v] / 3.0;
                b += data.rho1[v] / 3.0;
            }
            s.rho[mesh.bulk_prism(k, tri)] = (1.0 - t) * a + t * b;
        }
        for (int e = 0; e < mesh.n_curve_edges(); ++e) {
            const CurveEdge& ce = mesh.curve_edges[e];
            const double a = 0.5 * (data.mu0[ce.c0] + data.mu0[ce.c1]);
            const double b = 0.5 * (data.mu1[ce.c0] + data.mu1[ce.c1]);
            s.mu[mesh.curve_prism(k, e)] = (1.0 - t) * a + t * b;
        }
    }
    return s;
}

FixedCurveResult solve_fixed_curve(const Polyline& curve, const DataSpec& data, double h, int n_t,
                                   const TransportConfig& cfg) {
    if (!(cfg.alpha1 > 0.0 && cfg.alpha2 > 0.0 && cfg.r1 > 0.0 && cfg.r2 > 0.0 && cfg.tol > 0.0)) {
        throw Error(ErrorKind::ValidationError, "alphas, penalty weights and tolerance must be positive");
    }
    FixedCurveResult out;
    out.mesh = build_mesh(curve, h, n_t);
    out.data = make_boundary_data(data, out.mesh);
    out.state = interpolated_state(out.mesh, out.data);
    out.duals = DualState::zeros(out.mesh);
    const SaddleSystem sys = assemble_matrix(out.mesh, cfg.r1, cfg.r2, cfg.linear);
    out.report = run_alg(out.mesh, sys, out.data, cfg, out.state, out.duals, cfg.max_iters);
    return out;
}

PrimalState transfer_state(const SpaceTimeMesh& from, const PrimalState& s, const SpaceTimeMesh& to) {
    if (from.n_t != to.n_t) throw Error(ErrorKind::DimensionMismatch, "time slab counts differ");
    const auto bm = bulk_map(from, to);
    const auto cm = curve_map(from, to);
    PrimalState out;
    out.rho = inject(s.rho, bm, from.n_triangles(), to.n_t);
    out.Jx = inject(s.Jx, bm, from.n_triangles(), to.n_t);
    out.Jy = inject(s.Jy, bm, from.n_triangles(), to.n_t);
    out.mu = inject(s.mu, cm, from.n_curve_edges(), to.n_t);
    out.V = inject(s.V, cm, from.n_curve_edges(), to.n_t);
    out.f = inject(s.f, cm, from.n_curve_edges(), to.n_t);
    out.mesh_id = to.id;
    return out;
}

DualState transfer_duals(const SpaceTimeMesh& from, const DualState& d, const SpaceTimeMesh& to) {
    if (from.n_t != to.n_t) throw Error(ErrorKind::DimensionMismatch, "time slab counts differ");
    const auto bm = bulk_map(from, to);
    const auto cm = curve_map(from, to);
    DualState out = DualState::zeros(to);
    out.rho_s = inject(d.rho_s, bm, from.n_triangles(), to.n_t);
    out.Jx_s = inject(d.Jx_s, bm, from.n_triangles(), to.n_t);
    out.Jy_s = inject(d.Jy_s, bm, from.n_triangles(), to.n_t);
    out.mu_s = inject(d.mu_s, cm, from.n_curve_edges(), to.n_t);
    out.V_s = inject(d.V_s, cm, from.n_curve_edges(), to.n_t);
    out.f_s = inject(d.f_s, cm, from.n_curve_edges(), to.n_t);
    return out;
}

double curve_flux_share(const PrimalState& state, const SpaceTimeMesh& mesh) {
    double curve = 0.0;
    double bulk = 0.0;
    for (int k = 0; k < mesh.n_t; ++k) {
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const int p = mesh.bulk_prism(k, t);
            bulk += std::hypot(state.Jx[p], state.Jy[p]) * mesh.areas[t];
        }
        for (int e = 0; e < mesh.n_curve_edges(); ++e) {
            curve += std::abs(state.V[mesh.curve_prism(k, e)]) * mesh.curve_edges[e].length;
        }
    }
    const double total = curve + bulk;
    return total > 0.0 ? curve / total : 0.0;
}

TubeFlux tube_flux(const PrimalState& state, const SpaceTimeMesh& mesh, double radius) {
    TubeFlux out;
    const double dt = mesh.dt();
    std::vector<char> in_tube(mesh.n_triangles(), 0);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const Vec2 b = mesh.barycenter(t);
        for (int s = 0; s < mesh.curve.n_segments() && !in_tube[t]; ++s) {
            in_tube[t] = point_segment_distance(b, mesh.curve.point(s), mesh.curve.point(s + 1)) <= radius;
        }
    }
    for (int k = 0; k < mesh.n_t; ++k) {
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            if (!in_tube[t]) continue;
            const int p = mesh.bulk_prism(k, t);
            out.tube += std::hypot(state.Jx[p], state.Jy[p]) * mesh.areas[t] * dt;
        }
        for (int e = 0; e < mesh.n_curve_edges(); ++e) {
            out.curve += std::abs(state.V[mesh.curve_prism(k, e)]) * mesh.curve_edges[e].length * dt;
        }
    }
    return out;
}

}  // namespace prefot
