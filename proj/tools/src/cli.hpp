#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace leakaudit::cli {

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kUsageError = 2 };

// Runs one `leakaudit` invocation; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace leakaudit::cli
