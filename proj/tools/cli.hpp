#pragma once

#include <string>
#include <vector>

namespace bifkit::cli {

enum ExitCode : int { ok = 0, other = 1, usage = 2, divergence = 3, incompatible = 4 };

/// Runs one command line (without the program name). Never throws.
int run(const std::vector<std::string>& args);

}  // namespace bifkit::cli
