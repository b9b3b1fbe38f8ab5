#pragma once

// Command-line entry point:
//   qhydro run <config> [--out DIR] [--reproducible] [--grid N]
//   qhydro validate <config>
//   qhydro version
// The output directory is taken from --out, then QHYDRO_OUT_DIR, then the
// config's outputs.directory.

#include <iosfwd>
#include <string_view>

namespace qhydro::cli {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr const char* kOutDirEnv = "QHYDRO_OUT_DIR";

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qhydro::cli
