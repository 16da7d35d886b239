// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

// The LLM-facing side of tuning: prompt construction for pruning,
// initialization and recommendation, the chat-completion client contract,
// reply parsing, and a scripted mock model for hermetic runs.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "knobforge/knobspace.hpp"
#include "knobforge/target.hpp"

namespace knobforge {

enum class WorkloadType { OLTP, OLAP };

struct EnvironmentInfo {
  std::string engine_name = "MySQL";
  std::string engine_version = "8.0";
  int cpu_count = 8;
  std::int64_t memory_bytes = 16LL << 30;
  WorkloadType workload_type = WorkloadType::OLTP;
  double read_write_ratio = 0.5;
  std::int64_t data_size_bytes = 13LL << 30;
  std::string extra;
  // Optional human descriptions of internal metrics, keyed by metric name.
  std::map<std::string, std::string> metric_descriptions;

  void check() const;
};

EnvironmentInfo environment_from_json(const nlohmann::json& doc);
nlohmann::json environment_to_json(const EnvironmentInfo& env);

struct PromptBundle {
  std::vector<std::pair<std::string, std::string>> sections;
  std::string rendered;
};

// Section headers are rendered as "### <name>" lines.
PromptBundle make_prompt(std::vector<std::pair<std::string, std::string>> sections);
std::optional<std::string> prompt_section(std::string_view rendered, std::string_view name);

inline constexpr std::string_view kPruningSections[] = {
    "Task Description", "Candidate Knobs", "Workload and Database Information", "Output Format"};
inline constexpr std::string_view kRecommendationSections[] = {
    "Task Description", "Demonstration for Knob Refinement", "Environment", "Information about Current Workload",
    "Output Format",    "Current Configuration",             "Database Feedback"};

// One worked refinement example shown to the model.
struct Demonstration {
  Configuration current;
  std::map<std::string, double> metrics;
  Configuration refined;
};

Demonstration demonstration_from_json(const nlohmann::json& doc);

PromptBundle build_pruning_prompt(const ConfigurationSpace& space, const EnvironmentInfo& env, std::size_t k);

enum class RecommendationTask { initialization, refinement };

PromptBundle build_recommendation_prompt(const ConfigurationSpace& space, const EnvironmentInfo& env,
                                         const Configuration& current, const Feedback& feedback,
                                         const Demonstration* demonstration = nullptr,
                                         RecommendationTask task = RecommendationTask::refinement);

// ---------------------------------------------------------------------------
// Chat-completion contract

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 2048;
};

// Decoding settings: deterministic for pruning/recommendation, nucleus
// sampling for initialization.
inline constexpr double kDeterministicTemperature = 0.0;
inline constexpr double kSamplingTemperature = 1.0;
inline constexpr double kSamplingTopP = 0.98;

nlohmann::json chat_request_to_json(const ChatRequest& request);
// Content of the first choice's message; throws Error{llm_unavailable}.
std::string chat_response_content(const nlohmann::json& response);

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // Returns the raw reply text. Throws Error{llm_unavailable} on transport
  // failure. Implementations must tolerate concurrent calls.
  virtual std::string complete(const ChatRequest& request) = 0;
  virtual std::string model() const = 0;
};

struct HttpClientOptions {
  std::string base_url;  // e.g. http://localhost:8000/v1
  std::string model;
  double connect_timeout_seconds = 10.0;
  double read_timeout_seconds = 120.0;
  std::string api_key_env = "KNOBFORGE_LLM_KEY";
};

// OpenAI-compatible POST {base_url}/chat/completions with bearer auth.
class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(HttpClientOptions options);
  std::string complete(const ChatRequest& request) override;
  std::string model() const override { return options_.model; }

 private:
  HttpClientOptions options_;
};

enum class MockPolicy { hill_climb, echo, scripted, malformed };

MockPolicy mock_policy_from_string(std::string_view text);

// Domain knowledge handed to the hill-climbing mock: where a knob should head
// (normalized) and how much it matters.
struct KnobHint {
  double target = 0.5;
  double weight = 1.0;
};

std::map<std::string, KnobHint> hints_from_surface(const SynthSurfaceSpec& spec);

struct MockOptions {
  MockPolicy policy = MockPolicy::echo;
  std::vector<std::string> replies;  // scripted
  std::map<std::string, KnobHint> hints;  // hill_climb
  double pressure_threshold = 0.01;
  double step_fraction = 0.5;
  std::uint64_t seed = 0;
};

// Deterministic, network-free ChatClient. The hill-climber reads the Current
// Configuration and Database Feedback sections of the prompt and moves every
// hinted knob whose "<knob>_pressure" metric exceeds the threshold
// step_fraction of the way toward its hint. With temperature > 0 the fraction
// is drawn from its own seeded generator instead.
class MockLlm final : public ChatClient {
 public:
  MockLlm(ConfigurationSpace space, MockOptions options);

  std::string complete(const ChatRequest& request) override;
  std::string model() const override { return "mock-" + std::string(policy_name()); }

  std::size_t calls() const;
  std::vector<ChatRequest> requests() const;

 private:
  std::string_view policy_name() const;
  std::string hill_climb(const std::string& prompt, double temperature);
  std::string pick_knobs(const std::string& prompt) const;

  ConfigurationSpace space_;
  MockOptions options_;
  mutable std::mutex mutex_;
  std::mt19937_64 rng_;
  std::size_t next_reply_ = 0;
  std::vector<ChatRequest> requests_;
};

// ---------------------------------------------------------------------------
// Reply parsing

// First balanced JSON object or array in `text` that parses.
std::optional<nlohmann::json> extract_json(std::string_view text);

struct ParsedConfig {
  Configuration config;
  std::vector<Coercion> log;
};

// Unmentioned knobs keep their value from `base` (space defaults when null).
// Throws Error{parse_failure}.
ParsedConfig parse_config_response(const ConfigurationSpace& space, std::string_view raw_text,
                                   CoercionPolicy policy = CoercionPolicy::clamp_round,
                                   const Configuration* base = nullptr);

// Throws Error{parse_failure} when fewer than k usable entries remain.
PrunedSpace parse_pruning_response(const ConfigurationSpace& space, std::string_view raw_text, std::size_t k);

// ---------------------------------------------------------------------------
// The three LLM subtasks

struct AdvisorOptions {
  int retries = 3;
  CoercionPolicy policy = CoercionPolicy::clamp_round;
  const Demonstration* demonstration = nullptr;
  int max_tokens = 2048;
};

std::string system_message();

PrunedSpace llm_prune(ChatClient& client, const ConfigurationSpace& space, const EnvironmentInfo& env,
                      std::size_t k, const AdvisorOptions& options = {});

struct InitSampling {
  std::vector<Configuration> configs;
  std::vector<std::vector<Coercion>> logs;
  int attempts = 0;
  bool exhausted = false;  // fewer than u distinct configurations gathered
};

InitSampling llm_sample_initial_configs(ChatClient& client, const ConfigurationSpace& space,
                                        const EnvironmentInfo& env, const Feedback& default_feedback,
                                        std::size_t u, int max_attempts, const AdvisorOptions& options = {});

struct RefineResult {
  Configuration config;
  std::vector<Coercion> log;
  int attempts = 0;
};

// Throws Error{refine_failed} once retries are exhausted.
RefineResult llm_refine_step(ChatClient& client, const ConfigurationSpace& space, const EnvironmentInfo& env,
                             const Configuration& current, const Feedback& feedback,
                             const AdvisorOptions& options = {});

}  // namespace knobforge
