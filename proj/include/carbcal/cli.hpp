#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace carbcal::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kDataError = 2;
inline constexpr int kInternalError = 3;

// Runs `carbcal <subcommand> ...`. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace carbcal::cli
