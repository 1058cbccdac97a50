#pragma once

#include <iosfwd>

namespace chaoslab {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitNumerical = 2,
    kExitCheckFailed = 3,
};

/// Subcommands simulate, solve-limit, validate, chaos-study and gamma.
int cli_main(int argc, const char* const* argv);
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace chaoslab
