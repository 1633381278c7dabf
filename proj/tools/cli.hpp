#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sae::cli {

enum ExitCode : int {
    kSuccess = 0,
    kFailure = 1,
    kConfigError = 2,
    kNumericalError = 3,
};

/// Runs the `sae` command line. `in` feeds subcommands reading "-" or no input path.
int run(const std::vector<std::string> &args, std::istream &in, std::ostream &out,
        std::ostream &err);

} // namespace sae::cli
