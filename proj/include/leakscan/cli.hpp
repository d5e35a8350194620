#pragma once

// Command-line front end. `run` is the whole program minus process exit, so
// tests drive it in-process.
//
//   leakscan <scan|roc|robustness|subsets|metrics> --plan PATH --out DIR
//            [--threads N] [--tau-soft F] [--tau-hard F]

#include <ostream>

#include "leakscan/error.hpp"

namespace leakscan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

// One code per error category, starting at 10.
int exit_code(ErrorKind kind) noexcept;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace leakscan::cli
