#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace plr {

// Exit statuses of the plrlab command.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,    // bad command line
    kExitConfig = 2,   // config, format or missing-file error
    kExitRuntime = 3,  // numeric, dimension or generation failure
    kExitIo = 4,       // write failure or refused overwrite
};

/// Runs one command line (args[0] is the program name) and returns the
/// exit status. Diagnostics go to err as a single line.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace plr
