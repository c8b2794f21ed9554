#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace atd {

// Runs the command line (without the program name) and returns the exit
// code: 0 success, 1 usage error, 2 data error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace atd
