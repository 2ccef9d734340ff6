#pragma once

namespace msqg::cli {

// Full command-line entry point: parses argv, runs one subcommand, and maps
// errors to exit codes (0 ok, 2 usage/config, 3 data, 4 numeric). Never throws.
int run_cli(int argc, const char* const* argv);

}  // namespace msqg::cli
