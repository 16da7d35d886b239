// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#include "knobforge/error.hpp"

namespace knobforge {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::invalid_space: return "invalid_space";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::parse_failure: return "parse_failure";
    case ErrorCode::target_unavailable: return "target_unavailable";
    case ErrorCode::evaluation_timeout: return "evaluation_timeout";
    case ErrorCode::evaluation_failed: return "evaluation_failed";
    case ErrorCode::pruning_failed: return "pruning_failed";
    case ErrorCode::init_sampling_exhausted: return "init_sampling_exhausted";
    case ErrorCode::refine_failed: return "refine_failed";
    case ErrorCode::llm_unavailable: return "llm_unavailable";
    case ErrorCode::script_exhausted: return "script_exhausted";
    case ErrorCode::fit_failed: return "fit_failed";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::no_history: return "no_history";
    case ErrorCode::empty_history: return "empty_history";
    case ErrorCode::missing_first_refinement: return "missing_first_refinement";
    case ErrorCode::invalid_k: return "invalid_k";
    case ErrorCode::mixed_objective_kinds: return "mixed_objective_kinds";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::config_error: return "config_error";
  }
  return "unknown";
}

}  // namespace knobforge
