#pragma once

#include <string>
#include <vector>

namespace fscd::cli {

// Full command-line driver. `args` excludes the program name. Returns the
// process exit code: 0 success, 1 usage error, 2 I/O error, 3 numeric
// failure, 4 verification failure.
int run(std::vector<std::string> args);

}  // namespace fscd::cli
