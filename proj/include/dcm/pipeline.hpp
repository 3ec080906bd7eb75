#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dcm/error.hpp"

namespace dcm {

inline constexpr const char* kVersion = "0.1.0";

/// Process exit codes of the `dcm` tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitUsage = 2,
    kExitInput = 3,           // parse / validation failures
    kExitConfigMismatch = 4,
    kExitNumerical = 5,       // singular or unstable systems, failed replicates
    kExitPartial = 6,         // batch-score with at least one failed scenario
};

int exit_code_for(ErrorKind kind) noexcept;

/// Runs one subcommand. `args` excludes the program name. Diagnostics and
/// error JSON go to `err`, a one-line JSON summary to `out`.
int run_pipeline(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dcm
