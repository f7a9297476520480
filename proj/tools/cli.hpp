#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "finsler/error.hpp"

namespace finsler::cli {

inline constexpr const char* tool_name = "finsler-tool";
inline constexpr const char* tool_version = "0.1.0";

enum ExitCode : int { Success = 0, ConfigFailure = 2, NumericFailure = 3, ConvergenceFailed = 4 };

/// 2 for input errors, 4 for ConvergenceFailure, 3 for every other kind.
int exit_code_for(ErrorKind kind);

/// `args` excludes the program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace finsler::cli
