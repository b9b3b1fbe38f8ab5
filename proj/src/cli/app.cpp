#include "qhydro/cli/app.hpp"

#include "qhydro/cli/config.hpp"
#include "qhydro/cli/pipeline.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <ostream>

namespace qhydro::cli {

namespace {

void print_issues(const ConfigInvalid& e, std::ostream& err) {
    for (const auto& issue : e.issues()) err << "error: " << issue << '\n';
}

std::string resolve_out_dir(const std::string& flag, const ScenarioConfig& cfg) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
    return cfg.outputs.directory;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Quantum hydrodynamics scenario runner", "qhydro"};
    app.require_subcommand(1);

    std::string run_config, run_out;
    bool reproducible = false;
    int grid_n = 0;
    auto* run = app.add_subcommand("run", "Run a scenario and write fields, probes and a report");
    run->add_option("config", run_config, "Scenario configuration (JSON)")->required();
    run->add_option("--out", run_out, "Output directory (overrides QHYDRO_OUT_DIR and the config)");
    run->add_flag("--reproducible", reproducible, "Omit timestamps and timings so outputs are byte-identical");
    run->add_option("--grid", grid_n, "Resample the grid to N points per axis over the same box");

    std::string validate_config;
    auto* validate = app.add_subcommand("validate", "Check a configuration without computing anything");
    validate->add_option("config", validate_config, "Scenario configuration (JSON)")->required();

    auto* version = app.add_subcommand("version", "Print the program version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n' << "run 'qhydro --help' for usage\n";
        return kExitOther;
    }

    if (version->parsed()) {
        out << "qhydro " << kVersion << " (config schema " << kSchemaVersion << ")\n";
        return kExitOk;
    }

    try {
        if (validate->parsed()) {
            load_config(validate_config);
            out << "ok\n";
            return kExitOk;
        }
        ScenarioConfig cfg = load_config(run_config);
        if (run->count("--grid")) override_grid(cfg, grid_n);
        RunOptions opts;
        opts.out_dir = resolve_out_dir(run_out, cfg);
        opts.reproducible = reproducible;
        const auto outcome = run_scenario(cfg, opts, out);
        if (!outcome.report_path.empty()) out << "report: " << outcome.report_path << '\n';
        return outcome.exit_code;
    } catch (const ConfigInvalid& e) {
        print_issues(e, err);
        return kExitValidation;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitOther;
    }
}

}  // namespace qhydro::cli
