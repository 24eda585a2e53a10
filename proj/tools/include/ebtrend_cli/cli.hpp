#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ebtrend::cli {

/// Stable process exit codes.
enum ExitCode : int {
  kOk = 0,
  kParse = 2,
  kDesign = 3,
  kApplicability = 4,
  kNumerical = 5,
};

/// Entry point shared by the executable and the tests. argv[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ebtrend::cli
