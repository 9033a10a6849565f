#pragma once

#include <string>
#include <vector>

namespace svbrdf {

// Full command-line surface of svbrdf-forge. `args` excludes the program
// name. Returns the process exit code: 0 iff no error was reported.
int run_cli(const std::vector<std::string>& args);

}  // namespace svbrdf
