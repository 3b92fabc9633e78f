#pragma once

#include <ostream>

#include "sotk/cli/config.hpp"

namespace sotk::cli {

inline constexpr const char* kConfigEnvVar = "SOTK_CONFIG";

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// Runs one subcommand. The summary goes to `out` as a single JSON line,
// diagnostics to `err`. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sotk::cli
