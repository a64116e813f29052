#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace usat {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

// Runs one `usat` invocation; args exclude the program name. Human-readable
// output goes to `out`, errors to `err`. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace usat
