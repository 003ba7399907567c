#include "prefot/pathopt.hpp"

#include "prefot/errors.hpp"

#include <cmath>
#include <optional>

namespace prefot {

std::vector<std::string> violations(const PathOptConfig& c) {
    std::vector<std::string> out;
    auto need = [&](bool ok, const char* what) {
        if (!ok) out.emplace_back(what);
    };
    need(c.eps_fd > 0.0, "eps_fd must be positive");
    need(c.step0 > 0.0, "step0 must be positive");
    need(c.c0 > 0.0, "c0 must be positive");
    need(c.c_low > 0.0, "c_low must be positive");
    need(c.c_low < c.c0, "c_low must be below c0");
    need(c.n_iter > 0, "n_iter must be positive");
    need(c.it_max >= 0, "it_max must be nonnegative");
    need(c.inner_alg_iters > 0, "inner_alg_iters must be positive");
    need(c.tol > 0.0, "tol must be positive");
    need(c.delta > 0.0 && c.delta < 0.5, "delta must lie in (0, 0.5)");
    need(c.tpe_exponent > 2.0, "tpe_exponent must exceed 2");
    need(c.grad_floor >= 0.0, "grad_floor must be nonnegative");
    need(c.backtrack_growth >= 0.0, "backtrack_growth must be nonnegative");
    need(c.max_halvings >= 0, "max_halvings must be nonnegative");
    return out;
}

void validate(const PathOptConfig& c) {
    const auto v = violations(c);
    if (v.empty()) return;
    std::string msg;
    for (const auto& s : v) msg += (msg.empty() ? "" : "; ") + s;
    throw Error(ErrorKind::ValidationError, msg);
}

namespace {

// Mesh, data and warm fields for `curve`, starting from `base`. Same
// connectivity when the curve nodes can simply be moved.
std::optional<TransportContext> move_to(const Polyline& curve, const TransportContext& base, const DataSpec& spec) {
    if (!check_polyline(curve).ok) return std::nullopt;
    TransportContext ctx;
    if (auto moved = deform_mesh(base.mesh, curve)) {
        ctx.mesh = std::move(*moved);
        ctx.state = base.state;
        ctx.duals = base.duals;
        ctx.state.mesh_id = ctx.mesh.id;
        ctx.duals.mesh_id = ctx.mesh.id;
    } else {
        try {
            ctx.mesh = remesh(curve, base.mesh);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::MeshingFailure || e.kind() == ErrorKind::CurveSelfIntersection) return std::nullopt;
            throw;
        }
        ctx.state = transfer_state(base.mesh, base.state, ctx.mesh);
        ctx.duals = transfer_duals(base.mesh, base.duals, ctx.mesh);
    }
    ctx.data = make_boundary_data(spec, ctx.mesh);
    return ctx;
}

SolveReport solve_on(TransportContext& ctx, const TransportConfig& tcfg, int iters, bool trace) {
    const SaddleSystem sys = assemble_matrix(ctx.mesh, tcfg.r1, tcfg.r2, tcfg.linear);
    return run_alg(ctx.mesh, sys, ctx.data, tcfg, ctx.state, ctx.duals, iters, trace);
}

double regularizer_total(const Polyline& curve, double p) { return discrete_regularizer(curve, p).total; }

}  // namespace

ActionGradient fd_gradient_action(const Polyline& curve, const TransportContext& ctx, const DataSpec& spec,
                                  const TransportConfig& tcfg, const PathOptConfig& pcfg) {
    const Eigen::VectorXd x = curve.coordinates();
    const Eigen::Index n = x.size();
    ActionGradient g;
    g.values = Eigen::VectorXd::Zero(n);
    g.valid.assign(static_cast<std::size_t>(n), 0);
    g.plus.assign(static_cast<std::size_t>(n), 0.0);
    g.minus.assign(static_cast<std::size_t>(n), 0.0);
    auto evaluate = [&](const Eigen::VectorXd& coords) -> std::optional<double> {
        auto moved = move_to(Polyline::from_coordinates(coords), ctx, spec);
        if (!moved) return std::nullopt;
        const double a = solve_on(*moved, tcfg, pcfg.inner_alg_iters, false).action.value;
        if (!std::isfinite(a)) return std::nullopt;
        return a;
    };
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += pcfg.eps_fd;
        xm[i] -= pcfg.eps_fd;
        xp = project_box(Polyline::from_coordinates(xp), pcfg.delta).coordinates();
        xm = project_box(Polyline::from_coordinates(xm), pcfg.delta).coordinates();
        const double span = xp[i] - xm[i];
        if (!(span > 0.0)) continue;
        const auto ap = evaluate(xp);
        if (!ap) continue;
        const auto am = evaluate(xm);
        if (!am) continue;
        g.plus[i] = *ap;
        g.minus[i] = *am;
        g.values[i] = (*ap - *am) / span;
        g.valid[i] = 1;
    }
    return g;
}

Eigen::VectorXd descent_direction(const Eigen::VectorXd& gA, const Eigen::VectorXd& gR, double c, double floor,
                                  DirectionMode mode, const std::vector<char>& valid) {
    if (gA.size() != gR.size()) throw Error(ErrorKind::DimensionMismatch, "gradient lengths differ");
    if (!valid.empty() && static_cast<Eigen::Index>(valid.size()) != gA.size()) {
        throw Error(ErrorKind::DimensionMismatch, "validity mask length differs");
    }
    Eigen::VectorXd p = Eigen::VectorXd::Zero(gA.size());
    for (Eigen::Index i = 0; i < gA.size(); ++i) {
        if (!valid.empty() && !valid[static_cast<std::size_t>(i)]) continue;
        if (!(std::abs(gA[i]) > c * std::abs(gR[i]) + floor)) continue;
        const double g = gA[i] + c * gR[i];
        if (g == 0.0) continue;
        p[i] = mode == DirectionMode::Sign ? (g > 0.0 ? 1.0 : -1.0) : g;
    }
    const double norm = p.norm();
    if (norm > 0.0) p /= norm;
    return p;
}

PathOptResult optimize_path(const Polyline& initial, const DataSpec& spec, double h, int n_t,
                            const TransportConfig& tcfg, const PathOptConfig& pcfg) {
    validate(pcfg);
    validate_polyline(initial);
    const double p_exp = pcfg.tpe_exponent;

    PathOptResult out;
    out.curve = project_box(initial, pcfg.delta);
    validate_polyline(out.curve);
    TransportContext& ctx = out.final;
    ctx.mesh = build_mesh(out.curve, h, n_t);
    ctx.data = make_boundary_data(spec, ctx.mesh);
    ctx.state = interpolated_state(ctx.mesh, ctx.data);
    ctx.duals = DualState::zeros(ctx.mesh);
    out.report = solve_on(ctx, tcfg, tcfg.max_iters, true);

    double c = pcfg.c0;
    double reg = regularizer_total(out.curve, p_exp);
    double action = out.report.action.value;

    auto record = [&](int k, double step, int frozen, bool moved, double err) {
        PathTraceEntry e;
        e.outer_iter = k;
        e.curve = out.curve;
        e.action = action;
        e.regularizer = reg;
        e.total = action + c * reg;
        e.step = step;
        e.c = c;
        e.frozen = frozen;
        e.moved = moved;
        e.err = err;
        e.err_alg = out.report.err_alg;
        e.alg_iterations = out.report.iterations;
        out.trace.entries.push_back(std::move(e));
    };
    record(0, 0.0, 0, false, 0.0);

    int zero_run = 0;
    out.trace.stop_reason = "iteration cap reached";
    for (int k = 1; k <= pcfg.it_max; ++k) {
        if (zero_run >= pcfg.n_iter) {
            if (c > pcfg.c_low) {
                c *= 0.5;
                zero_run = 0;
            } else {
                out.trace.stop_reason = "stalled with c at its floor";
                break;
            }
        }

        const ActionGradient gA = fd_gradient_action(out.curve, ctx, spec, tcfg, pcfg);
        const RegularizerGradient gR = fd_gradient_reg(out.curve, p_exp, pcfg.eps_fd);
        std::vector<char> valid(gA.valid.size());
        for (std::size_t i = 0; i < valid.size(); ++i) valid[i] = gA.valid[i] && gR.valid[i];
        const Eigen::VectorXd dir = descent_direction(gA.values, gR.total, c, pcfg.grad_floor, pcfg.direction, valid);
        int frozen = 0;
        for (Eigen::Index i = 0; i < dir.size(); ++i) frozen += dir[i] == 0.0;

        if (dir.isZero(0.0)) {
            ++zero_run;
            record(k, 0.0, frozen, false, 0.0);
            continue;
        }

        // backtracking on the total cost at the current c
        const double old_total = action + c * reg;
        const Eigen::VectorXd x = out.curve.coordinates();
        bool accepted = false;
        double step = pcfg.step0;
        for (int halving = 0; halving <= pcfg.max_halvings && !accepted; ++halving, step *= 0.5) {
            const Polyline cand = project_box(Polyline::from_coordinates(x - step * dir), pcfg.delta);
            auto next = move_to(cand, ctx, spec);
            if (!next) continue;
            const SolveReport rep = solve_on(*next, tcfg, tcfg.max_iters, true);
            const double a = rep.action.value;
            const double r = regularizer_total(cand, p_exp);
            if (!std::isfinite(a) || !std::isfinite(r)) continue;
            if (a + c * r > old_total + pcfg.backtrack_growth * std::abs(old_total)) continue;
            const double move = (cand.coordinates() - x).cwiseAbs().maxCoeff();
            out.curve = cand;
            ctx = std::move(*next);
            out.report = rep;
            action = a;
            reg = r;
            accepted = true;
            zero_run = 0;
            const double err = move + rep.err_alg;
            record(k, step, frozen, true, err);
            if (err <= pcfg.tol) out.trace.stop_reason = "tolerance reached";
        }
        if (!accepted) {
            // every trial step was rejected; count it like a zero direction
            ++zero_run;
            record(k, 0.0, frozen, false, 0.0);
            continue;
        }
        if (out.trace.stop_reason == "tolerance reached") break;
    }
    return out;
}

}  // namespace prefot
