#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace ordreg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitRuntimeError = 2;

/// Runs one command line (args[0] is the program name) and returns one of
/// the exit codes above.
int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
        std::ostream& err = std::cerr);

}  // namespace ordreg::cli
