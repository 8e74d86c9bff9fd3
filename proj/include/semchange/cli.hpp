#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace semchange::cli {

// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kDataViolation = 1;
inline constexpr int kUsageError = 2;

// Runs `semchange <args...>` (args exclude the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace semchange::cli
