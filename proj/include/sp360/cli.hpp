#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace sp360 {

// Exit codes.
constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Runs one subcommand. args excludes the program name. The JSON run summary
/// goes to out, diagnostics to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sp360
