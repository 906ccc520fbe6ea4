#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kbound::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRemote = 2;
inline constexpr int kExitUsage = 64;

/// Runs one command. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kbound::cli
