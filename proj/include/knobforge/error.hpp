// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace knobforge {

enum class ErrorCode {
  invalid_argument,
  invalid_space,
  dimension_mismatch,
  parse_failure,
  target_unavailable,
  evaluation_timeout,
  evaluation_failed,
  pruning_failed,
  init_sampling_exhausted,
  refine_failed,
  llm_unavailable,
  script_exhausted,
  fit_failed,
  insufficient_data,
  no_history,
  empty_history,
  missing_first_refinement,
  invalid_k,
  mixed_objective_kinds,
  io_error,
  config_error,
};

std::string_view to_string(ErrorCode code);

// Domain error carrying a machine-readable code; the CLI maps codes to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace knobforge
