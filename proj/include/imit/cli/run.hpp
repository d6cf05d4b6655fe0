#pragma once

namespace imit {

// Entry point behind the `imitate` binary. Dispatches one of: gen-demos,
// train-vae, train-gail, eval, interpolate, blend, verify-theorem, gradcheck.
// Every subcommand takes --config PATH, --seed N (overrides the [run] seed)
// and --out DIR, writes its artifacts plus a manifest of input/output hashes,
// and is a pure function of (config, seed, input files).
//
// Exit status: 0 success, 1 usage error (bad flags, unreadable files,
// mismatched checkpoints), 2 numerical failure (non-finite values, failed
// residual or gradient verification).
int run_command(int argc, const char* const* argv);

}  // namespace imit
