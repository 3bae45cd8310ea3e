#pragma once

#include <iosfwd>

namespace pbound::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kConfigError = 2,
    kInfeasible = 3,
    kDivergence = 4,
    kBoundFailure = 5,
    kParseError = 6,
    kNotConverged = 7,
};

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pbound::cli
