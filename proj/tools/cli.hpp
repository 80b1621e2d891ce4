#pragma once

#include <string>
#include <vector>

namespace splatdrop::cli {

// Runs one command line (without the program name) and returns the process
// exit code: 0 success, 1 user error, 2 internal error.
int run(const std::vector<std::string>& args);

}  // namespace splatdrop::cli
