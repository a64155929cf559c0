#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qls/config.hpp"
#include "qls/fixtures.hpp"
#include "qls/report.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Quasilinear Schroedinger toolkit: trapping analysis, iteration and property checks"};
    std::string config_path, mode, out_dir, fixture_name;
    long seed = -1, threads = -1;
    bool verbose = false, print_schema = false;
    app.add_option("--config", config_path, "INI config file");
    app.add_option("--fixture", fixture_name, "built-in fixture instead of --config")
        ->check(CLI::IsMember(qls::fixture_names()));
    app.add_option("--mode", mode, "override run.mode")->check(CLI::IsMember({"analyze", "solve", "verify", "sweep"}));
    app.add_option("--out", out_dir, "override output.dir");
    app.add_option("--seed", seed, "override run.seed");
    app.add_option("--threads", threads, "override run.threads");
    app.add_flag("--verbose", verbose, "progress on stderr");
    app.add_flag("--schema", print_schema, "print the config schema as a markdown table");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : qls::kExitSchema;
    }
    if (print_schema) {
        std::cout << qls::schema_markdown();
        return 0;
    }
    try {
        if (config_path.empty() == fixture_name.empty())
            throw qls::ConfigError("give exactly one of --config or --fixture");
        qls::RunConfig cfg = fixture_name.empty() ? qls::RunConfig::load(config_path) : qls::fixture(fixture_name);
        if (!mode.empty()) cfg.set("run.mode", mode);
        if (!out_dir.empty()) cfg.set("output.dir", out_dir);
        if (seed >= 0) cfg.set("run.seed", std::to_string(seed));
        if (threads >= 0) cfg.set("run.threads", std::to_string(threads));
        const qls::RunOutcome r = qls::run(cfg, verbose);
        std::cout << "status " << r.report["status"].get<std::string>() << ", exit " << r.exit_code << ", wrote";
        for (const auto& f : r.files) std::cout << ' ' << f;
        std::cout << '\n';
        if (r.report.contains("error")) std::cerr << "error: " << r.report["error"].get<std::string>() << '\n';
        return r.exit_code;
    } catch (const qls::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return qls::kExitSchema;
    } catch (const qls::IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return qls::kExitIo;
    }
}
