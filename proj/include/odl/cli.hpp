#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace odl::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes shared by every subcommand.
enum ExitCode : int {
  kOk = 0,
  kUsage = 2,    // flag/config errors
  kData = 3,     // schema or stream errors
  kNumeric = 4,  // numeric divergence / undefined ratios
  kIo = 5,       // filesystem failures
};

// Environment variable: when set, relative output paths are resolved under
// this directory.
inline constexpr const char* kOutDirEnvVar = "ODL_OUT_DIR";

// Runs one invocation: args exclude the program name, e.g. {"gen",
// "--days", "3", ...}. All diagnostics go to `err`, data/status to `out`.
// Never mutates input files; outputs are only written after a command
// succeeds.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace odl::cli
