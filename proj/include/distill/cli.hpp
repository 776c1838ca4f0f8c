#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace distill {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitPartialFailure = 1, kExitUsage = 2 };

/// Runs the `distill` command line. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace distill
