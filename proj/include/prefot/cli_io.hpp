#pragma once

#include "prefot/errors.hpp"
#include "prefot/pathopt.hpp"
#include "prefot/transport.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace prefot {

enum class Mode { Solve, Optimize, SweepAlpha, OracleW2 };

std::string_view to_string(Mode mode);

struct RunConfig {
    Mode mode = Mode::Solve;
    double h = 0.05;
    int n_t = 25;
    TransportConfig transport;
    Polyline curve;
    DataSpec data;
    std::optional<PathOptConfig> pathopt;
    std::vector<double> sweep_alphas{0.01, 0.1, 1.0, 10.0, 100.0};
    int atoms_per_axis = 14;
    std::string output_dir = "out";
    bool mesh_dump = false;
    std::uint64_t seed = 0;
};

/// Parses JSON text. Syntax errors raise ParseError with the line; schema
/// violations are collected and raised together as one ValidationError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical JSON text (sorted keys); parse_config(dump_config(c)) == c.
std::string dump_config(const RunConfig& cfg);

/// Lists every schema violation of an already built config.
std::vector<std::string> config_violations(const RunConfig& cfg);

/// Fixed-curve output tables. Doubles are written with 17 significant digits.
void write_bulk_fields(std::ostream& os, const SpaceTimeMesh& mesh, const PrimalState& state);
void write_curve_fields(std::ostream& os, const SpaceTimeMesh& mesh, const PrimalState& state);
void write_cost_trace(std::ostream& os, const std::vector<TraceEntry>& trace);
void write_curve_evolution(std::ostream& os, const PathTrace& trace);
void write_mesh_triangles(std::ostream& os, const SpaceTimeMesh& mesh);

struct RunOutcome {
    int exit_code = 0;
    std::string message;
};

/// Runs the configured mode and writes its files into cfg.output_dir.
/// Library errors are mapped to exit codes rather than rethrown.
RunOutcome run(const RunConfig& cfg, std::ostream& log);

/// 2 for input problems, 3 for solver failures, 4 for geometry, 1 for I/O.
int exit_code(ErrorKind kind);

}  // namespace prefot
