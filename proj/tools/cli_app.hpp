#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vfiq::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kModelError = 3,
  kNumericError = 4,
};

/// Runs the command line in-process. Scores and tables go to `out`, logs
/// and diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vfiq::cli
