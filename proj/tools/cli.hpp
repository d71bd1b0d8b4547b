#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace unisafe::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kInfeasible = 2,
  kUsage = 64,
  kDataFormat = 65,
  kMissingFile = 66,
};

/// Runs one command line (without the program name). Results go to `out`,
/// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace unisafe::cli
