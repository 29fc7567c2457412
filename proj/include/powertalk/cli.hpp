#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace powertalk {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 2,
    kExitNumeric = 3,
    kExitInfeasible = 4,
};

/// Parses arguments (without the program name) and runs one subcommand:
/// solve, channel, budget, optimize, sweep or simulate. Tables go to `out`
/// unless --out names a file; errors go to `err` as "error: <Category>: ...".
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// printf("%.9g") for every number written by the tool.
std::string format_number(double value);

}  // namespace powertalk
