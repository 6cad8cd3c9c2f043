#pragma once

namespace krysp {

inline constexpr const char* kVersion = "0.1.0";

/// Command-line entry point. Exit codes: 0 success, 1 usage error, 2 I/O
/// error, 3 numerical failure (breakdown or non-convergence).
int cli_main(int argc, const char* const* argv);

}  // namespace krysp
