#pragma once

#include <iosfwd>

namespace wallinfer::app {

enum ExitCode : int { kOk = 0, kInternal = 1, kConfigError = 2, kDataError = 3, kNumericalError = 4 };

/// Parses the command line, runs one subcommand and returns the exit code.
/// The result JSON goes to `out`, diagnostics and error JSON to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wallinfer::app
