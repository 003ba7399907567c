#include <doctest.h>

#include "prefot/cli_io.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace prefot;
namespace fs = std::filesystem;

namespace {

const char* kUCurveConfig = R"({
  "mode": "solve",
  "mesh": {"h": 0.05, "n_t": 25},
  "transport": {"alpha1": 0.01, "alpha2": 0.01, "r1": 1.0, "r2": 1.0, "tol": 1e-5, "max_iters": 2000},
  "curve": [[0.3, 0.7], [0.4, 0.3], [0.6, 0.3], [0.7, 0.7]],
  "data": {
    "initial": {"support": "both", "bumps": [{"mx": 0.5, "my": 0.2, "sigma": 0.1, "weight": 1.0}]},
    "final": {"support": "both", "bumps": [{"mx": 0.2, "my": 0.8, "sigma": 0.1, "weight": 0.5},
                                           {"mx": 0.8, "my": 0.8, "sigma": 0.1, "weight": 0.5}]}
  },
  "output": {"dir": "out/ucurve"},
  "seed": 7
})";

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int count_lines(const std::string& s) {
    int n = 0;
    for (char ch : s) n += ch == '\n';
    return n;
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("prefot_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string validation_message(const std::string& text) {
    try {
        parse_config(text);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::ValidationError) return e.what();
        return "wrong kind: " + std::string(e.what());
    }
    return "no error";
}

RunConfig small_solve(const std::string& out) {
    RunConfig c = parse_config(kUCurveConfig);
    c.h = 0.1;
    c.n_t = 6;
    c.transport.max_iters = 60;
    c.output_dir = out;
    return c;
}

}  // namespace

TEST_CASE("the small-alpha example config parses and round-trips") {
    const RunConfig c = parse_config(kUCurveConfig);
    CHECK(c.mode == Mode::Solve);
    CHECK(c.h == 0.05);
    CHECK(c.n_t == 25);
    CHECK(c.transport.alpha1 == 0.01);
    CHECK(c.curve.n_points() == 4);
    CHECK(c.data.final.bumps.size() == 2);
    CHECK(c.seed == 7);
    CHECK_FALSE(c.pathopt.has_value());

    const std::string once = dump_config(c);
    const std::string twice = dump_config(parse_config(once));
    CHECK(once == twice);

    // key order in the source does not matter
    nlohmann::json j = nlohmann::json::parse(kUCurveConfig);
    CHECK(nlohmann::json::parse(once)["transport"]["alpha1"] == j["transport"]["alpha1"]);
}

TEST_CASE("optimize configs round-trip with every pathopt field") {
    nlohmann::json j = nlohmann::json::parse(kUCurveConfig);
    j["mode"] = "optimize";
    j["pathopt"] = {{"c0", 2e-3}, {"direction", "gradient"}, {"it_max", 7}};
    const RunConfig c = parse_config(j.dump());
    REQUIRE(c.pathopt.has_value());
    CHECK(c.pathopt->c0 == 2e-3);
    CHECK(c.pathopt->it_max == 7);
    CHECK(c.pathopt->direction == DirectionMode::Gradient);
    const std::string once = dump_config(c);
    CHECK(dump_config(parse_config(once)) == once);
}

TEST_CASE("schema violations are named and aggregated") {
    nlohmann::json j = nlohmann::json::parse(kUCurveConfig);
    j["transport"]["alpha1"] = -1.0;
    const std::string msg = validation_message(j.dump());
    CHECK(msg.find("transport.alpha1") != std::string::npos);

    j["mesh"]["h"] = 0.0;
    j["transport"]["colour"] = "red";
    const std::string all = validation_message(j.dump());
    CHECK(all.find("transport.alpha1") != std::string::npos);
    CHECK(all.find("mesh.h") != std::string::npos);
    CHECK(all.find("transport.colour") != std::string::npos);

    nlohmann::json opt = nlohmann::json::parse(kUCurveConfig);
    opt["mode"] = "optimize";
    CHECK(validation_message(opt.dump()).find("pathopt") != std::string::npos);

    nlohmann::json bad_mode = nlohmann::json::parse(kUCurveConfig);
    bad_mode["mode"] = "fly";
    CHECK(validation_message(bad_mode.dump()).find("mode") != std::string::npos);

    nlohmann::json sigma = nlohmann::json::parse(kUCurveConfig);
    sigma["data"]["initial"]["bumps"][0]["sigma"] = -0.1;
    CHECK(validation_message(sigma.dump()).find("data.initial.bumps[0].sigma") != std::string::npos);

    nlohmann::json pathopt = nlohmann::json::parse(kUCurveConfig);
    pathopt["mode"] = "optimize";
    pathopt["pathopt"] = {{"step0", -1.0}};
    CHECK(validation_message(pathopt.dump()).find("pathopt.step0") != std::string::npos);
}

TEST_CASE("syntax errors carry the line number") {
    const std::string text = "{\n  \"mode\": \"solve\",\n  \"mesh\": {\"h\": 0.05,,}\n}\n";
    try {
        parse_config(text);
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ParseError);
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(load_config("/nonexistent/prefot.json"), Error);
}

TEST_CASE("solve writes the documented files and reruns byte for byte") {
    const fs::path a = scratch("a"), b = scratch("b");
    RunConfig c = small_solve(a.string());
    c.mesh_dump = true;
    std::ostringstream log;
    const RunOutcome ra = run(c, log);
    REQUIRE(ra.exit_code == 0);

    const SpaceTimeMesh mesh = build_mesh(c.curve, c.h, c.n_t);
    const std::string curve_csv = read_file(a / "curve_fields.csv");
    CHECK(curve_csv.rfind("t_index,seg_id,s_mid,mu,V,f\n", 0) == 0);
    CHECK(count_lines(curve_csv) == 1 + c.n_t * mesh.n_curve_edges());
    const std::string bulk_csv = read_file(a / "bulk_fields.csv");
    CHECK(bulk_csv.rfind("t_index,tri_id,bary_x,bary_y,rho,Jx,Jy\n", 0) == 0);
    CHECK(count_lines(bulk_csv) == 1 + c.n_t * mesh.n_triangles());
    const std::string trace_csv = read_file(a / "cost_trace.csv");
    CHECK(trace_csv.rfind("iter,err_omega,err_gamma,action\n", 0) == 0);
    CHECK(count_lines(trace_csv) == 1 + c.transport.max_iters);
    CHECK(read_file(a / "curve_evolution.csv") == "outer_iter,point_idx,x,y\n");
    const std::string mesh_csv = read_file(a / "mesh_triangles.csv");
    CHECK(count_lines(mesh_csv) == 1 + mesh.n_triangles());

    // curve edge masks mark every curve edge from both sides when interior
    int marked = 0;
    std::istringstream rows(mesh_csv);
    std::string line;
    std::getline(rows, line);
    while (std::getline(rows, line)) {
        const int mask = std::stoi(line.substr(line.rfind(',') + 1));
        marked += (mask & 1) + ((mask >> 1) & 1) + ((mask >> 2) & 1);
    }
    CHECK(marked == 2 * mesh.n_curve_edges());

    const auto summary = nlohmann::json::parse(read_file(a / "summary.json"));
    CHECK(summary["iterations"] == c.transport.max_iters);
    CHECK(summary.contains("mass_max_deviation"));
    CHECK(summary["config"]["transport"]["alpha1"] == 0.01);

    c.output_dir = b.string();
    REQUIRE(run(c, log).exit_code == 0);
    for (const char* f : {"bulk_fields.csv", "curve_fields.csv", "cost_trace.csv", "mesh_triangles.csv"}) {
        CHECK_MESSAGE(read_file(a / f) == read_file(b / f), f);
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("a zero iteration cap exits cleanly and reports non-convergence") {
    const fs::path dir = scratch("cap");
    RunConfig c = small_solve(dir.string());
    c.transport.max_iters = 0;
    std::ostringstream log;
    const RunOutcome r = run(c, log);
    CHECK(r.exit_code == 0);
    const auto summary = nlohmann::json::parse(read_file(dir / "summary.json"));
    CHECK(summary["converged"] == false);
    CHECK(summary["stop_reason"] == "iteration cap reached");
    fs::remove_all(dir);
}

struct StationarySpread {
    double moment = 0.0;  // hat-function moments of rho over time slabs
    double cell = 0.0;    // raw cell values over time slabs
};

// Cell values are tested against P1 hat functions only, so per-cell patterns
// with zero hat moments carry no cost and are not unique. The moments are
// what the discrete problem fixes.
StationarySpread stationary_spread() {
    const fs::path dir = scratch("stat");
    RunConfig c;
    c.h = 0.1;
    c.n_t = 6;
    c.transport.tol = 1e-9;
    c.transport.max_iters = 4000;
    c.data.initial.support = Support::Bulk;
    c.data.initial.bumps = {{0.5, 0.4, 0.15, 1.0}};
    c.data.final = c.data.initial;
    c.output_dir = dir.string();
    std::ostringstream log;
    REQUIRE(run(c, log).exit_code == 0);

    const SpaceTimeMesh mesh = build_mesh(c.curve, c.h, c.n_t);
    std::vector<std::vector<double>> rho(c.n_t, std::vector<double>(mesh.n_triangles()));
    std::istringstream rows(read_file(dir / "bulk_fields.csv"));
    std::string line;
    std::getline(rows, line);
    while (std::getline(rows, line)) {
        std::istringstream cells(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(cells, cell, ',')) v.push_back(std::stod(cell));
        rho[static_cast<int>(v[0])][static_cast<int>(v[1])] = v[4];
    }
    fs::remove_all(dir);

    StationarySpread out;
    for (int v = 0; v < mesh.n_vertices(); ++v) {
        double lo = INFINITY, hi = -INFINITY;
        for (int k = 0; k < c.n_t; ++k) {
            double m = 0.0;
            for (int t = 0; t < mesh.n_triangles(); ++t)
                for (int a : mesh.triangles[t])
                    if (a == v) m += mesh.areas[t] / 3.0 * rho[k][t];
            lo = std::min(lo, m);
            hi = std::max(hi, m);
        }
        out.moment = std::max(out.moment, hi - lo);
    }
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        double lo = INFINITY, hi = -INFINITY;
        for (int k = 0; k < c.n_t; ++k) {
            lo = std::min(lo, rho[k][t]);
            hi = std::max(hi, rho[k][t]);
        }
        out.cell = std::max(out.cell, hi - lo);
    }
    return out;
}

TEST_CASE("stationary data gives a density constant in time") {
    const StationarySpread s = stationary_spread();
    MESSAGE("hat moment spread " << s.moment << ", cell spread " << s.cell);
    CHECK(s.moment <= 1e-5);
    CHECK(s.cell <= 1e-2);
}

TEST_CASE("stationary cell values constant to 1e-6" * doctest::may_fail()) {
    CHECK(stationary_spread().cell <= 1e-6);
}

TEST_CASE("errors map to exit codes by class") {
    CHECK(exit_code(ErrorKind::ValidationError) == 2);
    CHECK(exit_code(ErrorKind::ParseError) == 2);
    CHECK(exit_code(ErrorKind::NewtonDivergence) == 3);
    CHECK(exit_code(ErrorKind::SolverStagnation) == 3);
    CHECK(exit_code(ErrorKind::CurveSelfIntersection) == 4);
    CHECK(exit_code(ErrorKind::MeshingFailure) == 4);
    CHECK(exit_code(ErrorKind::IoError) == 1);

    std::ostringstream log;
    RunConfig bad = small_solve(scratch("bad").string());
    bad.transport.alpha2 = -3.0;
    CHECK(run(bad, log).exit_code == 2);

    RunConfig crossing = small_solve(scratch("cross").string());
    crossing.curve = Polyline({Vec2(0.2, 0.2), Vec2(0.8, 0.8), Vec2(0.8, 0.2), Vec2(0.2, 0.8)});
    const RunOutcome r = run(crossing, log);
    CHECK(r.exit_code == 4);
    fs::remove_all(scratch("bad"));
    fs::remove_all(scratch("cross"));
}

TEST_CASE("sweep and oracle modes") {
    const fs::path dir = scratch("sweep");
    RunConfig c = small_solve(dir.string());
    c.mode = Mode::SweepAlpha;
    c.sweep_alphas = {0.1, 10.0};
    std::ostringstream log;
    REQUIRE(run(c, log).exit_code == 0);
    CHECK(count_lines(read_file(dir / "sweep.csv")) == 3);
    fs::remove_all(dir);

    // translated bump: squared distance of the shift
    const fs::path odir = scratch("oracle");
    RunConfig o;
    o.mode = Mode::OracleW2;
    o.h = 0.05;
    o.n_t = 1;
    o.curve = Polyline({Vec2(0.05, 0.5), Vec2(0.5, 0.5), Vec2(0.95, 0.5)});
    o.data.initial.bumps = {{0.25, 0.25, 0.05, 1.0}};
    o.data.final.bumps = {{0.75, 0.75, 0.05, 1.0}};
    o.output_dir = odir.string();
    REQUIRE(run(o, log).exit_code == 0);
    const auto summary = nlohmann::json::parse(read_file(odir / "summary.json"));
    const double w2 = summary["w2_squared"].get<double>();
    CHECK(std::abs(w2 - 0.5) <= 0.05);
    fs::remove_all(odir);
}
