#pragma once

#include <string>
#include <vector>

namespace mustang {

// Entry point shared by the binary and the tests. `args` excludes the
// program name. Returns a process exit code; errors go to stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace mustang
