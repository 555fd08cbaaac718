#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace corrgraph::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kSchema = 2,
    kStore = 3,
    kInternal = 4,
};

/// Runs the command line `args` (without the program name) and returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace corrgraph::cli
