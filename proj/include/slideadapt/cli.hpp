#pragma once

#include <string>
#include <vector>

namespace slideadapt {

// Exit codes used by every subcommand.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitConfig = 5;

// Dispatches one CLI invocation (without the program name). Writes a run
// manifest beside each command's outputs.
int run_cli(const std::vector<std::string>& args);

}  // namespace slideadapt
