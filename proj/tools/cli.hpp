#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace grass {

// Runs the `grass` command line; returns the process exit code. Messages go
// to `out` and `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace grass
