#include "prefot/cli_io.hpp"

#include "prefot/oracle.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace prefot {

using nlohmann::json;

std::string_view to_string(Mode mode) {
    switch (mode) {
        case Mode::Solve: return "solve";
        case Mode::Optimize: return "optimize";
        case Mode::SweepAlpha: return "sweep-alpha";
        case Mode::OracleW2: return "oracle-w2";
    }
    return "solve";
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ParseError:
        case ErrorKind::ValidationError:
        case ErrorKind::ZeroMass: return 2;
        case ErrorKind::SolverStagnation:
        case ErrorKind::NewtonDivergence:
        case ErrorKind::NoBracket:
        case ErrorKind::Infeasible:
        case ErrorKind::DimensionMismatch: return 3;
        case ErrorKind::CurveSelfIntersection:
        case ErrorKind::MeshingFailure:
        case ErrorKind::ClosedCurve:
        case ErrorKind::DegenerateInput: return 4;
        case ErrorKind::IoError: return 1;
    }
    return 1;
}

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Reads typed fields out of one JSON object, recording every problem
// instead of stopping at the first.
class Reader {
public:
    Reader(const json& obj, std::string path, std::vector<std::string>& errors)
        : obj_(obj), path_(std::move(path)), errors_(errors) {
        if (!obj_.is_object()) fail("", "must be an object");
    }

    bool has(const char* key) const { return obj_.is_object() && obj_.contains(key); }

    const json* child(const char* key) {
        seen_.insert(key);
        if (!has(key)) return nullptr;
        return &obj_.at(key);
    }

    std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    void fail(const char* key, const std::string& what) {
        errors_.push_back((key[0] ? name(key) : path_) + " " + what);
    }

    void number(const char* key, double& out) {
        if (const json* v = child(key)) {
            if (v->is_number()) out = v->get<double>();
            else fail(key, "must be a number");
        }
    }

    template <class Int>
    void integer(const char* key, Int& out) {
        if (const json* v = child(key)) {
            if (v->is_number_integer()) out = v->get<Int>();
            else fail(key, "must be an integer");
        }
    }

    void boolean(const char* key, bool& out) {
        if (const json* v = child(key)) {
            if (v->is_boolean()) out = v->get<bool>();
            else fail(key, "must be true or false");
        }
    }

    void string(const char* key, std::string& out) {
        if (const json* v = child(key)) {
            if (v->is_string()) out = v->get<std::string>();
            else fail(key, "must be a string");
        }
    }

    // flags keys that nothing asked for
    void finish() {
        if (!obj_.is_object()) return;
        for (auto it = obj_.begin(); it != obj_.end(); ++it) {
            if (!seen_.count(it.key())) errors_.push_back(name(it.key().c_str()) + " is not a known field");
        }
    }

private:
    const json& obj_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
};

bool parse_point(const json& v, Vec2& out) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) return false;
    out = Vec2(v[0].get<double>(), v[1].get<double>());
    return true;
}

void read_end(const json& obj, const std::string& path, EndSpec& end, std::vector<std::string>& errors) {
    Reader r(obj, path, errors);
    std::string support = "both";
    r.string("support", support);
    if (support == "both") end.support = Support::Both;
    else if (support == "bulk") end.support = Support::Bulk;
    else if (support == "curve") end.support = Support::Curve;
    else r.fail("support", "must be one of both, bulk, curve");
    if (const json* b = r.child("bumps")) {
        if (!b->is_array()) {
            r.fail("bumps", "must be an array");
        } else {
            for (std::size_t i = 0; i < b->size(); ++i) {
                Bump bump;
                Reader br((*b)[i], r.name("bumps") + "[" + std::to_string(i) + "]", errors);
                br.number("mx", bump.mx);
                br.number("my", bump.my);
                br.number("sigma", bump.sigma);
                br.number("weight", bump.weight);
                br.finish();
                end.bumps.push_back(bump);
            }
        }
    } else {
        r.fail("bumps", "is required");
    }
    r.finish();
}

json end_json(const EndSpec& e) {
    json bumps = json::array();
    for (const Bump& b : e.bumps) bumps.push_back({{"mx", b.mx}, {"my", b.my}, {"sigma", b.sigma}, {"weight", b.weight}});
    const char* support = e.support == Support::Bulk ? "bulk" : e.support == Support::Curve ? "curve" : "both";
    return {{"support", support}, {"bumps", bumps}};
}

json config_json(const RunConfig& c) {
    json j;
    j["mode"] = std::string(to_string(c.mode));
    j["mesh"] = {{"h", c.h}, {"n_t", c.n_t}};
    const TransportConfig& t = c.transport;
    j["transport"] = {{"alpha1", t.alpha1},
                      {"alpha2", t.alpha2},
                      {"r1", t.r1},
                      {"r2", t.r2},
                      {"tol", t.tol},
                      {"max_iters", t.max_iters},
                      {"projection_tol", t.projection_tol},
                      {"linear_solver", t.linear.kind == LinearSolverKind::Cg ? "cg" : "tensor"},
                      {"linear_tol", t.linear.tol},
                      {"linear_max_iters", t.linear.max_iters}};
    json pts = json::array();
    for (const Vec2& p : c.curve.points()) pts.push_back({p.x(), p.y()});
    j["curve"] = pts;
    j["data"] = {{"initial", end_json(c.data.initial)},
                 {"final", end_json(c.data.final)},
                 {"curve_width", c.data.curve_width}};
    if (c.pathopt) {
        const PathOptConfig& p = *c.pathopt;
        j["pathopt"] = {{"eps_fd", p.eps_fd},
                        {"step0", p.step0},
                        {"c0", p.c0},
                        {"c_low", p.c_low},
                        {"n_iter", p.n_iter},
                        {"it_max", p.it_max},
                        {"inner_alg_iters", p.inner_alg_iters},
                        {"tol", p.tol},
                        {"delta", p.delta},
                        {"tpe_exponent", p.tpe_exponent},
                        {"grad_floor", p.grad_floor},
                        {"backtrack_growth", p.backtrack_growth},
                        {"max_halvings", p.max_halvings},
                        {"direction", p.direction == DirectionMode::Gradient ? "gradient" : "sign"}};
    }
    j["sweep"] = {{"alphas", c.sweep_alphas}};
    j["oracle"] = {{"atoms_per_axis", c.atoms_per_axis}};
    j["output"] = {{"dir", c.output_dir}, {"mesh_dump", c.mesh_dump}};
    j["seed"] = c.seed;
    return j;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& e : v) s += (s.empty() ? "" : "; ") + e;
    return s;
}

}  // namespace

std::vector<std::string> config_violations(const RunConfig& c) {
    std::vector<std::string> out;
    auto need = [&](bool ok, const std::string& what) {
        if (!ok) out.push_back(what);
    };
    need(c.h > 0.0 && c.h <= 0.5, "mesh.h must lie in (0, 0.5]");
    need(c.n_t >= 1, "mesh.n_t must be at least 1");
    const TransportConfig& t = c.transport;
    need(t.alpha1 > 0.0, "transport.alpha1 must be positive");
    need(t.alpha2 > 0.0, "transport.alpha2 must be positive");
    need(t.r1 > 0.0, "transport.r1 must be positive");
    need(t.r2 > 0.0, "transport.r2 must be positive");
    need(t.tol > 0.0, "transport.tol must be positive");
    need(t.max_iters >= 0, "transport.max_iters must be nonnegative");
    need(t.projection_tol > 0.0, "transport.projection_tol must be positive");
    need(t.linear.tol > 0.0, "transport.linear_tol must be positive");
    need(t.linear.max_iters >= 0, "transport.linear_max_iters must be nonnegative");

    if (!c.curve.empty()) {
        need(c.curve.n_points() >= 2, "curve needs at least two points");
        bool inside = true;
        for (const Vec2& p : c.curve.points()) inside = inside && p.minCoeff() > 0.0 && p.maxCoeff() < 1.0;
        need(inside, "curve points must lie strictly inside the unit square");
    }
    auto check_end = [&](const EndSpec& e, const std::string& name) {
        need(!e.bumps.empty(), name + ".bumps must not be empty");
        for (std::size_t i = 0; i < e.bumps.size(); ++i) {
            const std::string b = name + ".bumps[" + std::to_string(i) + "]";
            need(e.bumps[i].sigma > 0.0, b + ".sigma must be positive");
            need(e.bumps[i].weight > 0.0, b + ".weight must be positive");
        }
        need(e.support == Support::Bulk || !c.curve.empty(), name + ".support needs a curve");
    };
    check_end(c.data.initial, "data.initial");
    check_end(c.data.final, "data.final");
    need(c.data.curve_width >= 0.0, "data.curve_width must be nonnegative");

    if (c.mode == Mode::Optimize) {
        need(c.pathopt.has_value(), "mode optimize requires a pathopt block");
        need(c.curve.n_points() >= 2, "mode optimize requires a curve");
    }
    if (c.pathopt) {
        for (const auto& v : violations(*c.pathopt)) out.push_back("pathopt." + v);
    }
    if (c.mode == Mode::SweepAlpha) need(!c.sweep_alphas.empty(), "sweep.alphas must not be empty");
    for (double a : c.sweep_alphas) need(a > 0.0, "sweep.alphas entries must be positive");
    need(c.atoms_per_axis >= 1 && c.atoms_per_axis <= 20, "oracle.atoms_per_axis must lie in [1, 20]");
    need(!c.output_dir.empty(), "output.dir must not be empty");
    return out;
}

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) line += text[i] == '\n';
        throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + e.what());
    }

    if (!j.is_object()) throw Error(ErrorKind::ValidationError, "config must be a JSON object");
    RunConfig c;
    std::vector<std::string> errors;
    Reader top(j, "", errors);

    std::string mode;
    if (!top.has("mode")) top.fail("mode", "is required");
    top.string("mode", mode);
    if (mode == "solve") c.mode = Mode::Solve;
    else if (mode == "optimize") c.mode = Mode::Optimize;
    else if (mode == "sweep-alpha") c.mode = Mode::SweepAlpha;
    else if (mode == "oracle-w2") c.mode = Mode::OracleW2;
    else if (!mode.empty()) top.fail("mode", "must be one of solve, optimize, sweep-alpha, oracle-w2");

    if (const json* m = top.child("mesh")) {
        Reader r(*m, "mesh", errors);
        r.number("h", c.h);
        r.integer("n_t", c.n_t);
        r.finish();
    }
    if (const json* tj = top.child("transport")) {
        Reader r(*tj, "transport", errors);
        TransportConfig& t = c.transport;
        r.number("alpha1", t.alpha1);
        r.number("alpha2", t.alpha2);
        r.number("r1", t.r1);
        r.number("r2", t.r2);
        r.number("tol", t.tol);
        r.integer("max_iters", t.max_iters);
        r.number("projection_tol", t.projection_tol);
        std::string kind = "tensor";
        r.string("linear_solver", kind);
        if (kind == "tensor") t.linear.kind = LinearSolverKind::Tensor;
        else if (kind == "cg") t.linear.kind = LinearSolverKind::Cg;
        else r.fail("linear_solver", "must be tensor or cg");
        r.number("linear_tol", t.linear.tol);
        r.integer("linear_max_iters", t.linear.max_iters);
        r.finish();
    }
    if (const json* cj = top.child("curve")) {
        if (!cj->is_array()) {
            top.fail("curve", "must be an array of [x, y] pairs");
        } else {
            std::vector<Vec2> pts;
            for (std::size_t i = 0; i < cj->size(); ++i) {
                Vec2 p;
                if (parse_point((*cj)[i], p)) pts.push_back(p);
                else errors.push_back("curve[" + std::to_string(i) + "] must be an [x, y] pair");
            }
            c.curve = Polyline(std::move(pts));
        }
    }
    if (const json* dj = top.child("data")) {
        Reader r(*dj, "data", errors);
        if (const json* e = r.child("initial")) read_end(*e, "data.initial", c.data.initial, errors);
        else r.fail("initial", "is required");
        if (const json* e = r.child("final")) read_end(*e, "data.final", c.data.final, errors);
        else r.fail("final", "is required");
        r.number("curve_width", c.data.curve_width);
        r.finish();
    } else {
        top.fail("data", "is required");
    }
    if (const json* pj = top.child("pathopt")) {
        Reader r(*pj, "pathopt", errors);
        PathOptConfig p;
        r.number("eps_fd", p.eps_fd);
        r.number("step0", p.step0);
        r.number("c0", p.c0);
        r.number("c_low", p.c_low);
        r.integer("n_iter", p.n_iter);
        r.integer("it_max", p.it_max);
        r.integer("inner_alg_iters", p.inner_alg_iters);
        r.number("tol", p.tol);
        r.number("delta", p.delta);
        r.number("tpe_exponent", p.tpe_exponent);
        r.number("grad_floor", p.grad_floor);
        r.number("backtrack_growth", p.backtrack_growth);
        r.integer("max_halvings", p.max_halvings);
        std::string dir = "sign";
        r.string("direction", dir);
        if (dir == "sign") p.direction = DirectionMode::Sign;
        else if (dir == "gradient") p.direction = DirectionMode::Gradient;
        else r.fail("direction", "must be sign or gradient");
        r.finish();
        c.pathopt = p;
    }
    if (const json* sj = top.child("sweep")) {
        Reader r(*sj, "sweep", errors);
        if (const json* a = r.child("alphas")) {
            c.sweep_alphas.clear();
            if (!a->is_array()) r.fail("alphas", "must be an array of numbers");
            else
                for (const json& v : *a) {
                    if (v.is_number()) c.sweep_alphas.push_back(v.get<double>());
                    else r.fail("alphas", "must contain numbers only");
                }
        }
        r.finish();
    }
    if (const json* oj = top.child("oracle")) {
        Reader r(*oj, "oracle", errors);
        r.integer("atoms_per_axis", c.atoms_per_axis);
        r.finish();
    }
    if (const json* oj = top.child("output")) {
        Reader r(*oj, "output", errors);
        r.string("dir", c.output_dir);
        r.boolean("mesh_dump", c.mesh_dump);
        r.finish();
    }
    if (const json* s = top.child("seed")) {
        if (s->is_number_unsigned()) c.seed = s->get<std::uint64_t>();
        else top.fail("seed", "must be a nonnegative integer");
    }
    top.finish();

    if (errors.empty()) errors = config_violations(c);
    else
        for (auto& v : config_violations(c)) errors.push_back(std::move(v));
    if (!errors.empty()) throw Error(ErrorKind::ValidationError, join(errors));
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const RunConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

void write_bulk_fields(std::ostream& os, const SpaceTimeMesh& mesh, const PrimalState& s) {
    os << "t_index,tri_id,bary_x,bary_y,rho,Jx,Jy\n";
    for (int k = 0; k < mesh.n_t; ++k) {
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            const int p = mesh.bulk_prism(k, t);
            const Vec2 b = mesh.barycenter(t);
            os << k << ',' << t << ',' << num(b.x()) << ',' << num(b.y()) << ',' << num(s.rho[p]) << ','
               << num(s.Jx[p]) << ',' << num(s.Jy[p]) << '\n';
        }
    }
}

void write_curve_fields(std::ostream& os, const SpaceTimeMesh& mesh, const PrimalState& s) {
    os << "t_index,seg_id,s_mid,mu,V,f\n";
    const std::vector<double> arc = mesh.curve_arclength();
    for (int k = 0; k < mesh.n_t; ++k) {
        for (int e = 0; e < mesh.n_curve_edges(); ++e) {
            const int p = mesh.curve_prism(k, e);
            const CurveEdge& ce = mesh.curve_edges[e];
            const double mid = 0.5 * (arc[ce.c0] + arc[ce.c1]);
            os << k << ',' << e << ',' << num(mid) << ',' << num(s.mu[p]) << ',' << num(s.V[p]) << ','
               << num(s.f[p]) << '\n';
        }
    }
}

void write_cost_trace(std::ostream& os, const std::vector<TraceEntry>& trace) {
    os << "iter,err_omega,err_gamma,action\n";
    for (const TraceEntry& e : trace) {
        os << e.iter << ',' << num(e.err_omega) << ',' << num(e.err_gamma) << ',' << num(e.action) << '\n';
    }
}

void write_curve_evolution(std::ostream& os, const PathTrace& trace) {
    os << "outer_iter,point_idx,x,y\n";
    for (const PathTraceEntry& e : trace.entries) {
        for (int i = 0; i < e.curve.n_points(); ++i) {
            os << e.outer_iter << ',' << i << ',' << num(e.curve.point(i).x()) << ',' << num(e.curve.point(i).y())
               << '\n';
        }
    }
}

void write_mesh_triangles(std::ostream& os, const SpaceTimeMesh& mesh) {
    std::vector<char> on_curve(mesh.edges.size(), 0);
    for (const CurveEdge& e : mesh.curve_edges) on_curve[e.edge] = 1;
    os << "tri_id,v0x,v0y,v1x,v1y,v2x,v2y,on_curve_edge_mask\n";
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        os << t;
        for (int v : mesh.triangles[t]) os << ',' << num(mesh.vertices[v].x()) << ',' << num(mesh.vertices[v].y());
        // bit k: the edge opposite local vertex k lies on the curve
        int mask = 0;
        for (int k = 0; k < 3; ++k) mask |= on_curve[mesh.triangle_edges[t][k]] << k;
        os << ',' << mask << '\n';
    }
}

namespace {

namespace fs = std::filesystem;

template <class F>
void write_file(const fs::path& path, F&& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    body(out);
    out.flush();
    if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json curve_json(const Polyline& c) {
    json pts = json::array();
    for (const Vec2& p : c.points()) pts.push_back({p.x(), p.y()});
    return pts;
}

json solve_summary(const SpaceTimeMesh& mesh, const BoundaryData& data, const PrimalState& state,
                   const SolveReport& rep) {
    const MassReport mass = check_mass_conservation(state, mesh, data);
    return {{"converged", rep.converged},
            {"iterations", rep.iterations},
            {"err_alg", number_or_null(rep.err_alg)},
            {"stop_reason", rep.stop_reason},
            {"action", number_or_null(rep.action.value)},
            {"action_bulk", rep.action.bulk},
            {"action_curve_V", rep.action.curve_V},
            {"action_curve_f", rep.action.curve_f},
            {"action_infinite", rep.action.infinite},
            {"mass_max_deviation", mass.max_deviation},
            {"curve_flux_share", curve_flux_share(state, mesh)},
            {"n_vertices", mesh.n_vertices()},
            {"n_triangles", mesh.n_triangles()},
            {"n_curve_edges", mesh.n_curve_edges()}};
}

void write_fields(const fs::path& dir, const RunConfig& cfg, const SpaceTimeMesh& mesh, const PrimalState& state,
                  const SolveReport& rep) {
    write_file(dir / "bulk_fields.csv", [&](std::ostream& os) { write_bulk_fields(os, mesh, state); });
    write_file(dir / "curve_fields.csv", [&](std::ostream& os) { write_curve_fields(os, mesh, state); });
    write_file(dir / "cost_trace.csv", [&](std::ostream& os) { write_cost_trace(os, rep.trace); });
    if (cfg.mesh_dump) {
        write_file(dir / "mesh_triangles.csv", [&](std::ostream& os) { write_mesh_triangles(os, mesh); });
    }
}

void write_summary(const fs::path& dir, json summary, const RunConfig& cfg) {
    summary["mode"] = std::string(to_string(cfg.mode));
    summary["config"] = config_json(cfg);
    write_file(dir / "summary.json", [&](std::ostream& os) { os << summary.dump(2) << '\n'; });
}

RunOutcome run_solve(const RunConfig& cfg, const fs::path& dir, std::ostream& log) {
    const FixedCurveResult r = solve_fixed_curve(cfg.curve, cfg.data, cfg.h, cfg.n_t, cfg.transport);
    write_fields(dir, cfg, r.mesh, r.state, r.report);
    write_file(dir / "curve_evolution.csv", [&](std::ostream& os) { write_curve_evolution(os, PathTrace{}); });
    write_summary(dir, solve_summary(r.mesh, r.data, r.state, r.report), cfg);
    log << "solve: " << r.report.stop_reason << " after " << r.report.iterations << " iterations, action "
        << num(r.report.action.value) << "\n";
    return {0, r.report.stop_reason};
}

RunOutcome run_optimize(const RunConfig& cfg, const fs::path& dir, std::ostream& log) {
    const PathOptResult r = optimize_path(cfg.curve, cfg.data, cfg.h, cfg.n_t, cfg.transport, *cfg.pathopt);
    const TransportContext& f = r.final;
    write_fields(dir, cfg, f.mesh, f.state, r.report);
    write_file(dir / "curve_evolution.csv", [&](std::ostream& os) { write_curve_evolution(os, r.trace); });
    json s = solve_summary(f.mesh, f.data, f.state, r.report);
    json trace = json::array();
    for (const PathTraceEntry& e : r.trace.entries) {
        trace.push_back({{"outer_iter", e.outer_iter},
                         {"action", number_or_null(e.action)},
                         {"regularizer", number_or_null(e.regularizer)},
                         {"total", number_or_null(e.total)},
                         {"step", e.step},
                         {"c", e.c},
                         {"frozen", e.frozen},
                         {"moved", e.moved},
                         {"err", e.err}});
    }
    s["path"] = {{"stop_reason", r.trace.stop_reason},
                 {"outer_iterations", static_cast<int>(r.trace.entries.size()) - 1},
                 {"final_curve", curve_json(r.curve)},
                 {"trace", trace}};
    write_summary(dir, s, cfg);
    log << "optimize: " << r.trace.stop_reason << " after " << r.trace.entries.size() - 1
        << " outer iterations, total cost " << num(r.trace.entries.back().total) << "\n";
    return {0, r.trace.stop_reason};
}

RunOutcome run_sweep(const RunConfig& cfg, const fs::path& dir, std::ostream& log) {
    std::ostringstream csv;
    csv << "alpha,action,curve_flux_share\n";
    json rows = json::array();
    for (double a : cfg.sweep_alphas) {
        TransportConfig t = cfg.transport;
        t.alpha1 = t.alpha2 = a;
        const FixedCurveResult r = solve_fixed_curve(cfg.curve, cfg.data, cfg.h, cfg.n_t, t);
        const double share = curve_flux_share(r.state, r.mesh);
        csv << num(a) << ',' << num(r.report.action.value) << ',' << num(share) << '\n';
        rows.push_back({{"alpha", a},
                        {"action", number_or_null(r.report.action.value)},
                        {"curve_flux_share", share},
                        {"converged", r.report.converged},
                        {"iterations", r.report.iterations},
                        {"err_alg", number_or_null(r.report.err_alg)}});
        log << "sweep: alpha " << num(a) << " action " << num(r.report.action.value) << " share " << num(share)
            << "\n";
    }
    write_file(dir / "sweep.csv", [&](std::ostream& os) { os << csv.str(); });
    write_summary(dir, {{"sweep", rows}}, cfg);
    return {0, "sweep finished"};
}

RunOutcome run_oracle(const RunConfig& cfg, const fs::path& dir, std::ostream& log) {
    const SpaceTimeMesh mesh = build_mesh(cfg.curve, cfg.h, cfg.n_t);
    const BoundaryData data = make_boundary_data(cfg.data, mesh);
    const DiscreteMeasure a = atomize(mesh, data.rho0, data.mu0, cfg.atoms_per_axis);
    const DiscreteMeasure b = atomize(mesh, data.rho1, data.mu1, cfg.atoms_per_axis);
    const W2Result w = w2_squared_lp(a, b);
    write_summary(dir,
                  {{"w2_squared", w.cost},
                   {"dual_cost", w.dual_cost},
                   {"certificate", w.certificate},
                   {"atoms_initial", a.points.size()},
                   {"atoms_final", b.points.size()}},
                  cfg);
    log << "oracle-w2: W2^2 = " << num(w.cost) << " (certificate " << num(w.certificate) << ")\n";
    return {0, "oracle finished"};
}

}  // namespace

RunOutcome run(const RunConfig& cfg, std::ostream& log) {
    try {
        const auto v = config_violations(cfg);
        if (!v.empty()) throw Error(ErrorKind::ValidationError, join(v));
        const fs::path dir(cfg.output_dir);
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
        switch (cfg.mode) {
            case Mode::Solve: return run_solve(cfg, dir, log);
            case Mode::Optimize: return run_optimize(cfg, dir, log);
            case Mode::SweepAlpha: return run_sweep(cfg, dir, log);
            case Mode::OracleW2: return run_oracle(cfg, dir, log);
        }
        return {0, ""};
    } catch (const Error& e) {
        log << "error: " << e.what() << "\n";
        return {exit_code(e.kind()), e.what()};
    }
}

}  // namespace prefot
