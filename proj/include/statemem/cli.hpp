#pragma once

#include <string>
#include <vector>

namespace statemem {

// Entry point of the statemem tool. Returns the process exit code; errors
// are reported as a single line on stderr.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace statemem
