#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace geosafety::cli {

/// Exit codes: 0 success, 2 input/validation error, 1 internal error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInput = 2;

/// Runs the command line `args` (program name excluded), writing normal
/// output to `out` and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace geosafety::cli
