#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace armtest {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRefitRejected = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInfeasible = 3;
inline constexpr int kExitNotFound = 4;

// Runs one `armtest` invocation; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace armtest
