#pragma once

#include <string>
#include <vector>

namespace fmrigen::cli {

inline constexpr const char* kVersion = "1.0.0";

// Full front end: parses argv (program name excluded), runs one subcommand.
// Returns the process exit code: 0 success, 2 config/usage errors, 1
// runtime failures.
int run_cli(const std::vector<std::string>& args);

} // namespace fmrigen::cli
