#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace truncnorm::cli {

enum ExitCode : int
{
    kSuccess = 0,
    kInvalidInput = 2,
    kSamplingFailure = 3,
    kIoError = 4,
};

/// Runs the command line; args excludes the program name. Data goes to
/// `out` when no --out path is given, messages to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace truncnorm::cli
