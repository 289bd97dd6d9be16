#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace camscope::cli {

enum ExitCode : int {
  kSuccess = 0,
  kRuntimeError = 1,  // environment or runtime failure (e.g. port in use)
  kInvalidInput = 2,  // bad flags, unreadable or malformed inputs
};

/// Entry point shared by the executable and the tests. Data goes to `out`,
/// logs and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace camscope::cli
