#pragma once

#include <string>
#include <vector>

namespace han::cli {

// Full command-line front end, callable in-process. `args` excludes the
// program name ({"synth", "--out-dir", ...}). Returns the process exit
// code: 0 success, 2 usage error, 1 runtime failure.
int run(const std::vector<std::string>& args);

}  // namespace han::cli
