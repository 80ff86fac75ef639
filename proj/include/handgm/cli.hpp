#pragma once

namespace handgm {

/// Entry point of the command-line tool; returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace handgm
