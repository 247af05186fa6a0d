// Command-line front end: train, score, eval, inspect-attention, synth.
#pragma once

namespace tatt {

/// Exit codes: 0 success, 1 unexpected failure, 2 bad input (missing or
/// malformed files, mismatch, out-of-range flags), 3 training failure,
/// 4 evaluation impossible (too few scored words).
int run_cli(int argc, char** argv);

}  // namespace tatt
