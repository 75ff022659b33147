#pragma once

namespace caac::tools {

// Subcommands run, sweep and selftest. Exit codes: 0 success, 1 configuration
// error, 2 numerical abort, 3 other failures (I/O, failed self-test).
int Cli(int argc, char** argv);

}  // namespace caac::tools
