// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace knobforge {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitTarget = 2;
inline constexpr int kExitLlm = 3;
inline constexpr int kExitUsage = 64;
inline constexpr int kExitData = 65;

// Entry point of the knobforge tool: subcommands prune, init, tune, report
// and simulate.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace knobforge
