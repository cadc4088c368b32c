#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace koopal::cli {

enum ExitCode { kOk = 0, kCriteriaUnmet = 1, kUsage = 2, kInternal = 3 };

// Runs the command line; args excludes the program name. Human output goes to
// out, structured error JSON to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string help_text();

}  // namespace koopal::cli
