#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace trim {

/// Exit codes: 0 success, 1 runtime failure, 2 usage/config/input error.
/// Code 2 guarantees that no output file was written.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `trim` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace trim
