// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

// Tuning loops: GP-based Bayesian optimization (VBO), forest-based SMAC-style
// optimization, workload-mapping initialization and the LLM refinement loop.
// Every loop evaluates the default configuration first as iteration 0.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "knobforge/advisor.hpp"
#include "knobforge/forest.hpp"
#include "knobforge/knobspace.hpp"
#include "knobforge/metrics.hpp"
#include "knobforge/target.hpp"

namespace knobforge {

struct TunerBudget {
  int max_iterations = 400;  // evaluations after the default
  int init_points = 10;      // seeds plus LHS fill, counted within max_iterations
  std::uint64_t rng_seed = 0;

  // Throws Error{invalid_argument}.
  void check() const;
};

struct OptimizerOptions {
  int lhs_candidates = 2048;
  int local_candidates = 10;
  // SMAC draws every n-th suggestion uniformly at random.
  int random_interleave = 4;
  ForestOptions forest;
  int gp_restarts = 3;
};

using ObservationSink = std::function<void(const Observation&)>;

// Identity and plumbing shared by every loop.
struct RunContext {
  std::string session_id = "session";
  std::string method_label;
  std::string space_digest;
  // Called once per recorded observation, in order.
  ObservationSink sink;
  // Observations of an interrupted run. While the loop proposes the same
  // configurations they are reused instead of re-evaluated.
  std::vector<Observation> replay;
};

// Evaluates configurations against a target and numbers the results.
class RunRecorder {
 public:
  RunRecorder(Target& target, ObjectiveKind kind, const RunContext& context);

  const Observation& evaluate(const Configuration& config, std::vector<std::string> notes = {});

  const RunHistory& history() const { return history_; }
  RunHistory take() { return std::move(history_); }
  std::size_t replayed() const { return replayed_; }

 private:
  Target& target_;
  RunHistory history_;
  ObservationSink sink_;
  std::vector<Observation> replay_;
  std::size_t replayed_ = 0;
  bool replay_valid_ = true;
  double clock_offset_ = 0.0;
};

// Bayesian optimization over `space` with a GP surrogate and expected
// improvement maximized over LHS candidates plus incumbent perturbations.
RunHistory vbo_run(Target& target, const ConfigurationSpace& space, const TunerBudget& budget,
                   const std::vector<Configuration>& seeds = {}, const OptimizerOptions& options = {},
                   const RunContext& context = {});

// As vbo_run with a random-forest surrogate and random interleaving.
RunHistory smac_run(Target& target, const ConfigurationSpace& space, const TunerBudget& budget,
                    const std::vector<Configuration>& seeds = {}, const OptimizerOptions& options = {},
                    const RunContext& context = {});

// Picks the stored session whose default-configuration internal metrics are
// nearest (z-scored Euclidean) to `target_metrics` and returns its top_n best
// observations, coerced into `space`. Throws Error{no_history}.
struct MappingResult {
  std::size_t session_index = 0;
  double distance = 0.0;
  std::vector<Observation> observations;
};

MappingResult workload_mapping_init(const std::vector<RunHistory>& store, const Feedback& target_metrics,
                                    std::size_t top_n, const ConfigurationSpace& space);

inline constexpr int kMaxConsecutiveRefineFailures = 5;

// Default evaluation, then up to max_rounds refinement attempts. Stops early
// after kMaxConsecutiveRefineFailures refine_failed steps in a row.
RunHistory llm_tuning_run(Target& target, const ConfigurationSpace& space, const EnvironmentInfo& env,
                          ChatClient& client, int max_rounds = 30, const AdvisorOptions& options = {},
                          const RunContext& context = {});

}  // namespace knobforge
