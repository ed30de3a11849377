#pragma once

#include <iosfwd>

namespace factdnf::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitMissingInput = 2,
    kExitCorruptInput = 3,
    kExitMismatch = 4,
    kExitBackend = 5,
};

// Entry point shared by the binary and the tests.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace factdnf::cli
