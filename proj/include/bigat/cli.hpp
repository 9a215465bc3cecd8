#pragma once

namespace bigat::cli {

// Entry point behind the bigat binary. Subcommands: train, evaluate, sample,
// sweep, synth, gradcheck, baseline. Exit codes: 0 success, 1 usage,
// 2 data error, 3 numeric failure.
int cli_main(int argc, const char* const* argv);

} // namespace bigat::cli
