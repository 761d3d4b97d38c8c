#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace gridfm::cli {

/// Exit codes: 0 success, 1 domain error, 2 usage or input error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line; `args` excludes the program name.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gridfm::cli
