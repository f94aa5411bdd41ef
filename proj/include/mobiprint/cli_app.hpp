#pragma once

namespace mobiprint::cli {

/// Entry point behind main(): subcommands run, compare, calibrate,
/// validate. Returns the process exit code: 0 success, 2 validation or
/// parse failure, 3 runtime failure, 4 episode timeout, 5 degenerate
/// calibration.
int run_cli(int argc, const char* const* argv);

}  // namespace mobiprint::cli
