#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bdgd::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kDiverged = 3 };

/// Entry point of the `bdgd` tool: generate | train | reconstruct | baseline | evaluate.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bdgd::cli
