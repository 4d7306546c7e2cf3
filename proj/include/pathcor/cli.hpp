#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pathcor::cli {

enum ExitCode : int {
    kSuccess = 0,
    kUsage = 1,
    kDataError = 2,
    kNotConverged = 3,
};

// Full command-line entry point; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pathcor::cli
