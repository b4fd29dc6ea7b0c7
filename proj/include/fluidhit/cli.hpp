#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fluidhit {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitDomain = 1, kExitIo = 2 };

/// Runs the fluidhit command line; args excludes the program name.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace fluidhit
