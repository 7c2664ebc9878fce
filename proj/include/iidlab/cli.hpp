#pragma once

#include <ostream>

namespace iid::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitBadInput = 2;

/// Entry point of the iidlab tool. Errors are reported on `err` as a single
/// "error: <Code>: <message>" line.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace iid::cli
