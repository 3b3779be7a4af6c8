#pragma once

namespace reelgan::cli {

/// Parses argv, optionally merges an INI config file (flags win), and runs
/// one subcommand. Returns the process exit code: 0 success, 1 internal
/// error, 2 bad input, 3 empty result.
int run(int argc, const char* const* argv);

}  // namespace reelgan::cli
