// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace inn::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDiverged = 3;
inline constexpr int kExitAbcExhausted = 4;

/// Entry point of the `inn` tool: train, sample, abc, evaluate, latent-grid.
int run(int argc, char** argv);

}  // namespace inn::cli
