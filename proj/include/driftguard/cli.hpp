#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace driftguard::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitUsage = 2,
    kExitIo = 3,
};

// Runs one command line (args excludes the program name). Summary lines go
// to `out` as key=value pairs; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace driftguard::cli
