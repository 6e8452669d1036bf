#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cloudlayer::cli {

/// Runs one command line (args[0] is the program name). Returns the exit
/// code: 0 success, 1 invalid input, 2 internal failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cloudlayer::cli
