#pragma once

namespace qpoisson {

// Exit codes, also documented in the README.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;       // bad flags or flag values
inline constexpr int kExitValidation = 3;  // chain failed validation
inline constexpr int kExitNumeric = 4;     // numerical fault in a stage
inline constexpr int kExitIo = 5;          // file could not be read or written

/// Parses and dispatches one CLI invocation; returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace qpoisson
