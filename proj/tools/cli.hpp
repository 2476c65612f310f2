#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cfptas::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kValidation = 2, kComputation = 3 };

/// Runs one command line (without the program name). Results go to `out`, structured
/// errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cfptas::cli
