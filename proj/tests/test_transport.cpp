#include <doctest.h>

#include "prefot/dualproj.hpp"
#include "prefot/errors.hpp"
#include "prefot/oracle.hpp"
#include "prefot/transport.hpp"

#include <cmath>

using namespace prefot;

namespace {

const Polyline& u_curve() {
    static const Polyline c({Vec2(0.3, 0.7), Vec2(0.4, 0.3), Vec2(0.6, 0.3), Vec2(0.7, 0.7)});
    return c;
}

DataSpec ucurve_data() {
    DataSpec d;
    d.initial.bumps = {{0.5, 0.2, 0.1, 1.0}};
    d.final.bumps = {{0.2, 0.8, 0.1, 0.5}, {0.8, 0.8, 0.1, 0.5}};
    return d;
}

int mirror_vertex(const SpaceTimeMesh& m, int v) {
    const Vec2 q(1.0 - m.vertices[v].x(), m.vertices[v].y());
    int best = 0;
    for (int w = 1; w < m.n_vertices(); ++w)
        if ((m.vertices[w] - q).squaredNorm() < (m.vertices[best] - q).squaredNorm()) best = w;
    return best;
}

int mirror_triangle(const SpaceTimeMesh& m, int t) {
    const Vec2 b = m.barycenter(t);
    const Vec2 q(1.0 - b.x(), b.y());
    int best = 0;
    for (int s = 1; s < m.n_triangles(); ++s)
        if ((m.barycenter(s) - q).squaredNorm() < (m.barycenter(best) - q).squaredNorm()) best = s;
    return best;
}

struct Run {
    SpaceTimeMesh mesh;
    BoundaryData data;
    PrimalState state;
    DualState duals;
    SolveReport report;
};

Run run_ucurve(double alpha, int iters) {
    Run r;
    r.mesh = build_mesh(u_curve(), 0.05, 25);
    r.data = make_boundary_data(ucurve_data(), r.mesh);
    r.state = PrimalState::zeros(r.mesh);
    r.duals = DualState::zeros(r.mesh);
    TransportConfig cfg;
    cfg.alpha1 = cfg.alpha2 = alpha;
    cfg.tol = 1e-12;
    const SaddleSystem sys = assemble_matrix(r.mesh, cfg.r1, cfg.r2, cfg.linear);
    r.report = run_alg(r.mesh, sys, r.data, cfg, r.state, r.duals, iters, true);
    return r;
}

}  // namespace

TEST_CASE("boundary data from Gaussian bumps") {
    const SpaceTimeMesh mesh = build_mesh(u_curve(), 0.05, 4);

    SUBCASE("u-curve example") {
        const BoundaryData d = make_boundary_data(ucurve_data(), mesh);
        const double c0 = curve_mass(mesh, d.mu0);
        CHECK(bulk_mass(mesh, d.rho0) + c0 == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(bulk_mass(mesh, d.rho1) + curve_mass(mesh, d.mu1) == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(c0 > 0.0);
        CHECK(c0 < 0.25);
        // the curve density peaks on the bottom segment
        Eigen::Index imax = 0;
        d.mu0.maxCoeff(&imax);
        const Vec2 at = mesh.vertices[mesh.curve_nodes[imax]];
        CHECK(at.x() >= 0.4);
        CHECK(at.x() <= 0.6);
        CHECK(at.y() == doctest::Approx(0.3).epsilon(1e-12));
        // bulk density sits below the curve
        Eigen::Index vmax = 0;
        d.rho0.maxCoeff(&vmax);
        CHECK(mesh.vertices[vmax].y() < 0.3);
    }
    SUBCASE("far bump leaves the curve empty") {
        DataSpec s;
        s.initial.bumps = {{0.9, 0.9, 0.01, 1.0}};
        s.final = s.initial;
        const BoundaryData d = make_boundary_data(s, mesh);
        CHECK(curve_mass(mesh, d.mu0) <= 1e-6);
    }
    SUBCASE("mirrored bumps give mirrored data") {
        DataSpec s;
        s.initial.bumps = {{0.3, 0.4, 0.1, 1.0}, {0.7, 0.4, 0.1, 1.0}};
        s.final.bumps = {{0.5, 0.8, 0.1, 1.0}};
        const BoundaryData d = make_boundary_data(s, mesh);
        const double scale = d.rho0.maxCoeff();
        for (int v = 0; v < mesh.n_vertices(); ++v) {
            const int w = mirror_vertex(mesh, v);
            CHECK(std::abs(d.rho0[v] - d.rho0[w]) <= 1e-10 * scale);
            CHECK(std::abs(d.rho1[v] - d.rho1[w]) <= 1e-10 * scale);
        }
    }
    SUBCASE("support selection") {
        DataSpec s = ucurve_data();
        s.initial.support = Support::Bulk;
        s.final.support = Support::Curve;
        const BoundaryData d = make_boundary_data(s, mesh);
        CHECK(d.mu0.isZero(0.0));
        CHECK(d.rho1.isZero(0.0));
        CHECK(curve_mass(mesh, d.mu1) == doctest::Approx(1.0).epsilon(1e-13));
    }
    SUBCASE("invalid specs") {
        DataSpec s = ucurve_data();
        s.initial.bumps[0].sigma = 0.0;
        CHECK_THROWS_AS(make_boundary_data(s, mesh), Error);
        s = ucurve_data();
        s.final.bumps[1].weight = -1.0;
        CHECK_THROWS_AS(make_boundary_data(s, mesh), Error);
        s = ucurve_data();
        s.final.bumps.clear();
        CHECK_THROWS_AS(make_boundary_data(s, mesh), Error);
        s = ucurve_data();
        s.curve_width = -0.1;
        CHECK_THROWS_AS(make_boundary_data(s, mesh), Error);
        // a needle bump between lattice points underflows everywhere
        s = ucurve_data();
        const Vec2 b = mesh.barycenter(0);
        s.initial.bumps = {{b.x(), b.y(), 1e-4, 1.0}};
        try {
            make_boundary_data(s, mesh);
            FAIL("expected ZeroMass");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::ZeroMass);
        }
    }
}

TEST_CASE("discrete action examples") {
    const SpaceTimeMesh square = build_mesh(Polyline(), 0.1, 4);
    PrimalState s = PrimalState::zeros(square);
    CHECK(discrete_action(s, square, 1.0, 1.0).value == 0.0);

    s.rho.setOnes();
    s.Jx.setOnes();
    auto a = discrete_action(s, square, 1.0, 1.0);
    CHECK(a.value == doctest::Approx(0.5).epsilon(1e-13));
    CHECK_FALSE(a.infinite);

    s = PrimalState::zeros(square);
    s.Jx[square.bulk_prism(2, 7)] = 1.0;
    a = discrete_action(s, square, 1.0, 1.0);
    CHECK(a.infinite);
    CHECK(a.flagged_cells == 1);
    CHECK(std::isinf(a.value));

    // curve terms carry alpha1 and alpha2
    const SpaceTimeMesh m = build_mesh(u_curve(), 0.1, 4);
    s = PrimalState::zeros(m);
    s.mu.setOnes();
    s.V.setConstant(2.0);
    s.f.setConstant(1.0);
    a = discrete_action(s, m, 0.5, 3.0);
    const double L = u_curve().length();
    CHECK(a.curve_V == doctest::Approx(0.5 * 2.0 * L).epsilon(1e-12));
    CHECK(a.curve_f == doctest::Approx(3.0 * 0.5 * L).epsilon(1e-12));
    CHECK(a.bulk == 0.0);
}

TEST_CASE("mobility action") {
    const SpaceTimeMesh m = build_mesh(u_curve(), 0.1, 4);
    PrimalState s = PrimalState::zeros(m);
    for (int p = 0; p < m.n_bulk_prisms(); ++p) {
        s.rho[p] = 0.5 + 0.3 * std::sin(p);
        s.Jx[p] = std::cos(0.7 * p);
        s.Jy[p] = 0.2;
    }
    for (int p = 0; p < m.n_curve_prisms(); ++p) {
        s.mu[p] = 1.0 + 0.5 * std::cos(p);
        s.V[p] = 0.3 * p;
        s.f[p] = -0.1;
    }
    const Mobility lin = Mobility::linear();
    const double twice = 2.0 * discrete_action(s, m, 0.7, 2.0).value;
    CHECK(evaluate_mobility_action(s, m, lin, lin, 0.7, 2.0).value == doctest::Approx(twice).epsilon(1e-13));

    const Mobility logistic{[](double z) { return z * (1.0 - z); }, 0.0, 1.0};
    const SpaceTimeMesh square = build_mesh(Polyline(), 0.1, 4);
    PrimalState q = PrimalState::zeros(square);
    q.rho.setConstant(0.5);
    q.Jx.setConstant(0.1);
    CHECK(evaluate_mobility_action(q, square, logistic, logistic, 1.0, 1.0).value ==
          doctest::Approx(0.04).epsilon(1e-12));
    q.rho[3] = 2.0;
    CHECK(evaluate_mobility_action(q, square, logistic, logistic, 1.0, 1.0).infinite);
}

TEST_CASE("one step at a KKT point changes nothing") {
    const SpaceTimeMesh m = build_mesh(u_curve(), 0.1, 5);
    BoundaryData d;
    d.rho0 = Eigen::VectorXd::Ones(m.n_vertices());
    d.rho1 = d.rho0;
    d.mu0 = Eigen::VectorXd::Zero(m.n_curve_nodes());
    d.mu1 = d.mu0;
    d.mesh_id = m.id;
    PrimalState s = PrimalState::zeros(m);
    s.rho.setOnes();
    DualState du = DualState::zeros(m);
    const PrimalState before = s;
    TransportConfig cfg;
    const SaddleSystem sys = assemble_matrix(m, cfg.r1, cfg.r2, cfg.linear);
    const StepErrors e = alg_step(m, sys, d, cfg, s, du);
    CHECK((s.rho - before.rho).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(s.Jx.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(s.Jy.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(s.mu.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(s.V.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(s.f.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(e.err_omega + e.err_gamma <= 1e-12);
}

TEST_CASE("stationary data converges to zero action") {
    DataSpec s;
    s.initial.bumps = {{0.5, 0.4, 0.15, 1.0}};
    s.final = s.initial;
    TransportConfig cfg;
    cfg.alpha1 = cfg.alpha2 = 1.0;
    cfg.tol = 1e-4;
    cfg.max_iters = 3000;
    const auto r = solve_fixed_curve(u_curve(), s, 0.1, 8, cfg);
    CHECK(r.report.converged);
    CHECK(r.report.action.value <= 1e-6);
    CHECK(r.report.stop_reason == "tolerance reached");
}

TEST_CASE("iteration cap is reported") {
    TransportConfig cfg;
    cfg.max_iters = 0;
    const auto r = solve_fixed_curve(u_curve(), ucurve_data(), 0.1, 5, cfg);
    CHECK_FALSE(r.report.converged);
    CHECK(r.report.iterations == 0);
    CHECK(r.report.stop_reason == "iteration cap reached");
    cfg.max_iters = 10;
    cfg.alpha1 = -1.0;
    CHECK_THROWS_AS(solve_fixed_curve(u_curve(), ucurve_data(), 0.1, 5, cfg), Error);
}

TEST_CASE("u-curve transport at small and large alpha") {
    const Run small = run_ucurve(0.01, 500);
    const auto& tr = small.report.trace;
    REQUIRE(tr.size() == 500);

    SUBCASE("error decays and duals stay feasible") {
        const double first = tr.front().err_omega + tr.front().err_gamma;
        const double last = tr.back().err_omega + tr.back().err_gamma;
        CHECK(first / last >= 10.0);
        for (int p = 0; p < small.mesh.n_bulk_prisms(); ++p) {
            const double js = std::hypot(small.duals.Jx_s[p], small.duals.Jy_s[p]);
            CHECK(small.duals.rho_s[p] + 0.5 * js * js <= 1e-10);
        }
        for (int p = 0; p < small.mesh.n_curve_prisms(); ++p) {
            const double v = small.duals.V_s[p], f = small.duals.f_s[p];
            CHECK(small.duals.mu_s[p] + 0.5 * (v * v / 0.01 + f * f / 0.01) <= 1e-10);
        }
    }
    SUBCASE("mass per slab") {
        const MassReport mr = check_mass_conservation(small.state, small.mesh, small.data);
        CHECK(mr.reference == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(mr.max_deviation <= 5e-2);
    }
    SUBCASE("mirror symmetry") {
        const auto& m = small.mesh;
        for (int t = 0; t < m.n_triangles(); ++t) {
            const int s = mirror_triangle(m, t);
            for (int k = 0; k < m.n_t; ++k) {
                CHECK(std::abs(small.state.rho[m.bulk_prism(k, t)] - small.state.rho[m.bulk_prism(k, s)]) <= 1e-4);
                CHECK(std::abs(small.state.Jx[m.bulk_prism(k, t)] + small.state.Jx[m.bulk_prism(k, s)]) <= 1e-4);
            }
        }
    }
    SUBCASE("curve transport dominates only for small alpha") {
        const Run large = run_ucurve(100.0, 500);
        const TubeFlux fs = tube_flux(small.state, small.mesh, small.mesh.h);
        const TubeFlux fl = tube_flux(large.state, large.mesh, large.mesh.h);
        CHECK(fs.curve > fs.tube);
        CHECK(fl.curve < fl.tube);
        CHECK(curve_flux_share(small.state, small.mesh) > 3.0 * curve_flux_share(large.state, large.mesh));
    }
}

TEST_CASE("incompatible masses cost more as alpha2 grows") {
    DataSpec s;
    s.initial.bumps = {{0.5, 0.5, 0.1, 1.0}};
    s.initial.support = Support::Bulk;
    s.final.bumps = {{0.5, 0.5, 0.1, 1.0}};
    s.final.support = Support::Curve;
    const Polyline line({Vec2(0.2, 0.5), Vec2(0.5, 0.5), Vec2(0.8, 0.5)});
    double prev = 0.0;
    for (double a2 : {0.1, 1.0, 10.0}) {
        TransportConfig cfg;
        cfg.alpha1 = 1.0;
        cfg.alpha2 = a2;
        cfg.max_iters = 800;
        const auto r = solve_fixed_curve(line, s, 0.1, 10, cfg);
        CHECK(r.report.action.value > prev);
        prev = r.report.action.value;
    }
}

TEST_CASE("state transfer between meshes") {
    const SpaceTimeMesh a = build_mesh(u_curve(), 0.1, 3);
    PrimalState s = PrimalState::zeros(a);
    for (int p = 0; p < a.n_bulk_prisms(); ++p) s.rho[p] = 1.0 + p;
    for (int p = 0; p < a.n_curve_prisms(); ++p) s.mu[p] = 2.0 + p;

    const PrimalState same = transfer_state(a, s, a);
    CHECK(same.rho == s.rho);
    CHECK(same.mu == s.mu);

    const Polyline shifted({Vec2(0.31, 0.7), Vec2(0.41, 0.31), Vec2(0.6, 0.32), Vec2(0.69, 0.7)});
    const SpaceTimeMesh b = build_mesh(shifted, 0.1, 3);
    PrimalState c = PrimalState::zeros(a);
    c.rho.setConstant(0.7);
    c.mu.setConstant(0.3);
    const PrimalState moved = transfer_state(a, c, b);
    CHECK(moved.mesh_id == b.id);
    CHECK(moved.rho.size() == b.n_bulk_prisms());
    CHECK(moved.mu.size() == b.n_curve_prisms());
    CHECK((moved.rho.array() == 0.7).all());
    CHECK((moved.mu.array() == 0.3).all());

    const SpaceTimeMesh other_t = build_mesh(shifted, 0.1, 4);
    CHECK_THROWS_AS(transfer_state(a, c, other_t), Error);
}
