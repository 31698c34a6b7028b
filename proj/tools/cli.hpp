#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace getad::cli {

/// Runs one command line (args[0] is the program name). Returns the exit
/// code: 0 on success, 1 on runtime failure, 2 on bad usage.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace getad::cli
