#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dln::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // a check failed or a numerical error surfaced
inline constexpr int kExitUsage = 2;    // bad arguments, bad config or I/O

/// Runs one subcommand. `args` excludes the program name. The one-line
/// summary goes to `out`; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dln::cli
