#pragma once

// Scenario pipeline: builds the fields a scenario describes, runs the
// analysis stages and writes field files, probes and the JSON report.

#include "qhydro/cli/config.hpp"

#include "json.hpp"

#include <iosfwd>
#include <string>

namespace qhydro::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitOther = 1,
    kExitValidation = 2,
    kExitSolverFailure = 3,
};

/// Exit code for an error escaping the pipeline.
int exit_code_for(ErrorCode code);

struct RunOptions {
    std::string out_dir;        // resolved output directory
    bool reproducible = false;  // no timestamps or timings in any output
};

struct RunOutcome {
    int exit_code = kExitOk;
    std::string report_path;  // empty when no report was written
    nlohmann::json report;
};

/// Runs the scenario and prints one summary line per stage to `log`.
/// Validation-class errors raised while building fields give exit 2, solver
/// failures exit 3; in both cases the report is written with the failure.
RunOutcome run_scenario(const ScenarioConfig& cfg, const RunOptions& opts, std::ostream& log);

}  // namespace qhydro::cli
