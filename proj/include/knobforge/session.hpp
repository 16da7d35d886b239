// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

// Session configuration: one JSON file naming the catalog, the target, the
// LLM endpoint or mock, budgets and output location. String values may use
// ${VAR} to pull from the environment.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "knobforge/advisor.hpp"
#include "knobforge/knobspace.hpp"
#include "knobforge/optimize.hpp"
#include "knobforge/target.hpp"

namespace knobforge {

struct SessionBudgets {
  TunerBudget tune{60, 10, 0};
  int llm_rounds = 30;
  std::size_t prune_samples = 200;
  int shapley_permutations = 200;
  int init_max_attempts = 30;
};

struct SessionConfig {
  std::filesystem::path base_dir;  // relative paths resolve against this
  std::string session_id;
  std::filesystem::path catalog_path;
  std::optional<std::filesystem::path> surface_path;  // simulator target
  std::optional<ExternalHooks> hooks;                 // external target
  ObjectiveKind objective_kind = ObjectiveKind::throughput_tps;
  bool objective_kind_explicit = false;  // otherwise a simulator's own kind wins
  EnvironmentInfo environment;
  nlohmann::json llm;  // {"mock": {...}} or {"base_url": ..., "model": ...}
  SessionBudgets budgets;
  std::filesystem::path output_dir = "knobforge-out";
  std::uint64_t seed = 0;
  CoercionPolicy coercion_policy = CoercionPolicy::clamp_round;
  int retries = 3;
  std::optional<Demonstration> demonstration;
};

// Replaces ${NAME} with the environment variable NAME; unset variables are a
// config_error.
std::string interpolate_env(const std::string& text);

// Throws Error{config_error} or Error{io_error}.
SessionConfig session_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                                std::string session_id);
SessionConfig load_session(const std::filesystem::path& path);

// Everything a command needs, built from a SessionConfig.
class Session {
 public:
  explicit Session(SessionConfig config);

  const SessionConfig& config() const { return config_; }
  const ConfigurationSpace& catalog() const { return catalog_; }
  const std::optional<SynthSurfaceSpec>& surface() const { return surface_; }

  // A fresh target; simulators restart their noise stream and clock.
  std::unique_ptr<Target> make_target() const;
  // `space` is what the client will be asked about (the mock reads it).
  std::unique_ptr<ChatClient> make_client(const ConfigurationSpace& space) const;
  AdvisorOptions advisor_options() const;

 private:
  SessionConfig config_;
  ConfigurationSpace catalog_;
  std::optional<SynthSurfaceSpec> surface_;
};

}  // namespace knobforge
