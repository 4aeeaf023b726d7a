#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace moppo {

/// Exit statuses of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitInput = 3, kExitRuntime = 4 };

/// Runs the `moppo` command line. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace moppo
