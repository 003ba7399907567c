#include "prefot/cli_io.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

int main(int argc, char** argv) {
    CLI::App app{"Dynamic optimal transport with a preferential curve"};
    std::string mode, config, out;
    bool quiet = false;
    app.add_option("mode", mode, "solve | optimize | sweep-alpha | oracle-w2")
        ->required()
        ->check(CLI::IsMember({"solve", "optimize", "sweep-alpha", "oracle-w2"}));
    app.add_option("--config", config, "JSON run configuration")->required();
    app.add_option("--out", out, "output directory (overrides output.dir)");
    app.add_flag("--quiet", quiet, "only report errors");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    using namespace prefot;
    RunConfig cfg;
    try {
        cfg = load_config(config);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    }
    if (mode == "solve") cfg.mode = Mode::Solve;
    else if (mode == "optimize") cfg.mode = Mode::Optimize;
    else if (mode == "sweep-alpha") cfg.mode = Mode::SweepAlpha;
    else cfg.mode = Mode::OracleW2;
    if (!out.empty()) cfg.output_dir = out;

    std::ostringstream sink;
    const RunOutcome r = run(cfg, quiet ? static_cast<std::ostream&>(sink) : std::cout);
    if (quiet && r.exit_code != 0) std::cerr << "error: " << r.message << "\n";
    return r.exit_code;
}
