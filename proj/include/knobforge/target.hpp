// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

// Tuning targets: something that applies a configuration, runs the workload
// and reports feedback. Two implementations ship: a deterministic response
// surface simulator and an adapter that drives a real engine through external
// commands.

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "knobforge/knobspace.hpp"

namespace knobforge {

enum class ObjectiveKind { throughput_tps, latency_seconds };

std::string_view to_string(ObjectiveKind kind);
ObjectiveKind objective_kind_from_string(std::string_view text);

inline bool maximizes(ObjectiveKind kind) { return kind == ObjectiveKind::throughput_tps; }

// True when `a` is a strictly better objective value than `b`.
inline bool better(ObjectiveKind kind, double a, double b) {
  return maximizes(kind) ? a > b : a < b;
}

struct Feedback {
  ObjectiveKind kind = ObjectiveKind::throughput_tps;
  double objective = 0.0;
  std::map<std::string, double> internal_metrics;
  double eval_duration_seconds = 0.0;
};

enum class EvalStatus { ok, target_unavailable, evaluation_timeout, evaluation_failed };

std::string_view to_string(EvalStatus status);
EvalStatus eval_status_from_string(std::string_view text);

struct EvalOutcome {
  EvalStatus status = EvalStatus::ok;
  std::optional<Feedback> feedback;
  std::string message;

  bool ok() const { return status == EvalStatus::ok && feedback.has_value(); }
};

struct Observation {
  int iteration = 0;
  Configuration config;
  EvalStatus status = EvalStatus::ok;
  std::optional<Feedback> feedback;
  double timestamp = 0.0;
  std::vector<std::string> notes;  // coercions and failure messages

  bool ok() const { return status == EvalStatus::ok && feedback.has_value(); }
};

// Only one evaluation may be in flight per target; callers serialize.
class Target {
 public:
  virtual ~Target() = default;
  virtual ObjectiveKind objective_kind() const = 0;
  virtual EvalOutcome evaluate(const Configuration& config) = 0;
  // Seconds since the session epoch used to stamp observations.
  virtual double now() const = 0;
};

// ---------------------------------------------------------------------------
// Synthetic response surface

enum class ResponseShape { quadratic, saturating, step };

std::string_view to_string(ResponseShape shape);
ResponseShape response_shape_from_string(std::string_view text);

struct ImportantKnob {
  std::string name;
  double weight = 0.0;
  double optimum = 0.5;  // normalized position
  ResponseShape shape = ResponseShape::quadratic;
};

struct InteractionPair {
  std::string first;
  std::string second;
  double weight = 0.0;
};

struct SynthSurfaceSpec {
  std::uint64_t seed = 0;
  std::vector<ImportantKnob> important_knobs;
  std::vector<InteractionPair> interaction_pairs;
  double noise_sd = 0.0;
  double base_objective = 1.0;
  ObjectiveKind objective_kind = ObjectiveKind::throughput_tps;
  // Latency surfaces report latency_scale / surface_value.
  double latency_scale = 1.0e4;
  double eval_duration_seconds = 120.0;

  void check(const ConfigurationSpace& space) const;
};

double shape_value(ResponseShape shape, double x, double optimum);

// Noise-free surface value (before the latency transform).
double surface_value(const SynthSurfaceSpec& spec, const ConfigurationSpace& space,
                     const Configuration& config);

// Objective including gaussian noise drawn from `rng` when noise_sd > 0.
double synth_objective(const SynthSurfaceSpec& spec, const ConfigurationSpace& space,
                       const Configuration& config, std::mt19937_64* rng = nullptr);

std::map<std::string, double> synth_internal_metrics(const SynthSurfaceSpec& spec,
                                                     const ConfigurationSpace& space,
                                                     const Configuration& config,
                                                     double objective);

SynthSurfaceSpec surface_from_json(const nlohmann::json& doc);
nlohmann::json surface_to_json(const SynthSurfaceSpec& spec);
SynthSurfaceSpec load_surface(const std::filesystem::path& path);

class Simulator final : public Target {
 public:
  // `space` is the full catalog; configurations from pruned spaces are
  // completed with catalog defaults before evaluation.
  Simulator(ConfigurationSpace space, SynthSurfaceSpec spec);

  ObjectiveKind objective_kind() const override { return spec_.objective_kind; }
  EvalOutcome evaluate(const Configuration& config) override;
  double now() const override { return clock_; }

  const SynthSurfaceSpec& spec() const { return spec_; }
  const ConfigurationSpace& space() const { return space_; }

  // Defaults with every important knob at its optimum position.
  Configuration oracle_configuration() const;
  double oracle_objective() const;

 private:
  ConfigurationSpace space_;
  SynthSurfaceSpec spec_;
  std::mt19937_64 rng_;
  double clock_ = 0.0;
};

// ---------------------------------------------------------------------------
// External engine adapter

struct CommandResult {
  int exit_code = 0;
  bool timed_out = false;
  std::string output;
};

// Runs `command` through /bin/sh, capturing stdout. A timeout <= 0 waits forever.
CommandResult run_command(const std::string& command, double timeout_seconds);

struct ExternalHooks {
  // Commands may reference {config_file}; an apply command that references
  // {knob_name} or {knob_value} runs once per knob.
  std::string apply;
  std::string restart;
  std::string benchmark;
  std::string metrics;  // optional
  std::string objective_pattern = R"(tps:\s*([0-9]+(?:\.[0-9]+)?))";
  std::filesystem::path config_file = "knobforge_config.cnf";
  std::string config_format = "ini";  // "ini" (name = value lines) or "json"
  std::string config_section;         // optional [section] header for ini
  double timeout_seconds = 600.0;
  ObjectiveKind objective_kind = ObjectiveKind::throughput_tps;
};

ExternalHooks hooks_from_json(const nlohmann::json& doc);

class ExternalTarget final : public Target {
 public:
  ExternalTarget(ConfigurationSpace space, ExternalHooks hooks);

  ObjectiveKind objective_kind() const override { return hooks_.objective_kind; }
  EvalOutcome evaluate(const Configuration& config) override;
  double now() const override;

 private:
  ConfigurationSpace space_;
  ExternalHooks hooks_;
};

// Parses "name: value" / "name=value" / "name value" lines or a JSON object.
std::map<std::string, double> parse_metrics_output(const std::string& text);

}  // namespace knobforge
