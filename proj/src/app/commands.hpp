#pragma once

#include <iosfwd>

namespace spidereval::app {

/// Parses argv, runs one subcommand and returns the process exit code:
/// 0 success, 1 validation failure, 2 computation failure. Failures are
/// reported as a JSON object on `err`.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace spidereval::app
