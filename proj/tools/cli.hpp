#pragma once

#include <iosfwd>

namespace somfdr::cli {

/// Runs the command-line tool. Exit codes: 0 success, 1 internal error,
/// 2 input or usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace somfdr::cli
