// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "knobforge/advisor.hpp"
#include "knobforge/error.hpp"

namespace knobforge {

namespace {

// Narrowed pruning ranges span this much of the normalized axis on each side
// of the hint.
constexpr double kPruneHalfWidth = 0.25;

std::map<std::string, double> parse_feedback_section(const std::string& text) {
  std::map<std::string, double> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    try {
      out[line.substr(0, colon)] = std::stod(line.substr(colon + 1));
    } catch (const std::exception&) {
    }
  }
  return out;
}

std::string reply_with(const nlohmann::json& doc, std::string_view lead) {
  return fmt::format("{}\n```json\n{}\n```\n", lead, doc.dump(2));
}

}  // namespace

MockPolicy mock_policy_from_string(std::string_view text) {
  if (text == "hill_climb") return MockPolicy::hill_climb;
  if (text == "echo") return MockPolicy::echo;
  if (text == "scripted") return MockPolicy::scripted;
  if (text == "malformed") return MockPolicy::malformed;
  throw Error(ErrorCode::config_error, fmt::format("unknown mock policy '{}'", text));
}

std::map<std::string, KnobHint> hints_from_surface(const SynthSurfaceSpec& spec) {
  std::map<std::string, KnobHint> hints;
  for (const auto& k : spec.important_knobs) {
    KnobHint h;
    h.weight = std::abs(k.weight);
    // Thresholded shapes are aimed slightly past the knee so rounding cannot
    // leave the knob just short of it.
    h.target = k.shape == ResponseShape::quadratic ? k.optimum : std::min(1.0, k.optimum + 0.05);
    hints[k.name] = h;
  }
  return hints;
}

MockLlm::MockLlm(ConfigurationSpace space, MockOptions options)
    : space_(std::move(space)), options_(std::move(options)), rng_(options_.seed) {}

std::size_t MockLlm::calls() const {
  std::lock_guard lock(mutex_);
  return requests_.size();
}

std::vector<ChatRequest> MockLlm::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

std::string_view MockLlm::policy_name() const {
  switch (options_.policy) {
    case MockPolicy::hill_climb: return "hill_climb";
    case MockPolicy::echo: return "echo";
    case MockPolicy::scripted: return "scripted";
    case MockPolicy::malformed: return "malformed";
  }
  return "unknown";
}

std::string MockLlm::complete(const ChatRequest& request) {
  std::lock_guard lock(mutex_);
  requests_.push_back(request);
  const std::string prompt = request.messages.empty() ? std::string{} : request.messages.back().content;
  switch (options_.policy) {
    case MockPolicy::scripted:
      if (next_reply_ >= options_.replies.size()) {
        throw Error(ErrorCode::script_exhausted,
                    fmt::format("mock script exhausted after {} replies", options_.replies.size()));
      }
      return options_.replies[next_reply_++];
    case MockPolicy::malformed:
      return "Raise the buffer pool size and lower the flush frequency; the remaining knobs look fine.";
    case MockPolicy::echo:
      if (prompt_section(prompt, "Candidate Knobs")) return pick_knobs(prompt);
      if (auto current = prompt_section(prompt, "Current Configuration")) {
        return reply_with(nlohmann::json::parse(*current), "The current configuration is already appropriate.");
      }
      return "{}";
    case MockPolicy::hill_climb:
      if (prompt_section(prompt, "Candidate Knobs")) return pick_knobs(prompt);
      return hill_climb(prompt, request.temperature);
  }
  return {};
}

std::string MockLlm::hill_climb(const std::string& prompt, double temperature) {
  const auto current_text = prompt_section(prompt, "Current Configuration");
  if (!current_text) return "{}";
  const nlohmann::json current_json = nlohmann::json::parse(*current_text);
  CoercionResult parsed = coerce_configuration(space_, current_json, CoercionPolicy::clamp_round);
  if (!parsed.ok()) return reply_with(current_json, "Keep the current configuration.");
  const Configuration& current = *parsed.config;
  const auto feedback = parse_feedback_section(prompt_section(prompt, "Database Feedback").value_or(""));

  double fraction = options_.step_fraction;
  if (temperature > 0.0) fraction = std::uniform_real_distribution<double>(0.5, 1.0)(rng_);

  std::vector<double> point = normalize(space_, current);
  Configuration next = current;
  for (const auto& [name, hint] : options_.hints) {
    const auto idx = space_.index_of(name);
    if (!idx) continue;
    const auto pressure = feedback.find(name + "_pressure");
    if (pressure == feedback.end() || pressure->second <= options_.pressure_threshold) continue;
    const double from = point[*idx];
    std::vector<double> moved = point;
    moved[*idx] = from + fraction * (hint.target - from);
    KnobValue value = denormalize(space_, moved).at(name);
    if (value == current.at(name)) {
      // Grid too coarse for a partial step: jump to the hinted position.
      moved[*idx] = hint.target;
      value = denormalize(space_, moved).at(name);
    }
    next.set(name, value);
  }
  return reply_with(to_json(space_, next), "Recommended configuration based on the observed feedback:");
}

std::string MockLlm::pick_knobs(const std::string& prompt) const {
  std::size_t k = 1;
  std::smatch m;
  const std::string format = prompt_section(prompt, "Output Format").value_or("");
  static const std::regex exactly(R"(exactly (\d+))");
  if (std::regex_search(format, m, exactly)) k = std::stoul(m[1].str());
  k = std::min(k, space_.dimension());

  std::vector<std::pair<std::string, KnobHint>> hinted;
  if (options_.policy == MockPolicy::hill_climb) {
    for (const auto& [name, hint] : options_.hints) {
      if (space_.find(name) != nullptr) hinted.emplace_back(name, hint);
    }
    std::stable_sort(hinted.begin(), hinted.end(),
                     [](const auto& a, const auto& b) { return a.second.weight > b.second.weight; });
  }

  nlohmann::json out = nlohmann::json::array();
  std::set<std::string> used;
  for (const auto& [name, hint] : hinted) {
    if (out.size() == k) break;
    const Knob& knob = space_.knob(name);
    nlohmann::json entry{{"name", name}};
    if (knob.is_numeric()) {
      const double lo = std::max(0.0, hint.target - kPruneHalfWidth);
      const double hi = std::min(1.0, hint.target + kPruneHalfWidth);
      double lo_v = knob.min + lo * (knob.max - knob.min);
      double hi_v = knob.min + hi * (knob.max - knob.min);
      if (knob.type == KnobType::integer) {
        lo_v = std::ceil(lo_v);
        hi_v = std::floor(hi_v);
      }
      entry["min"] = value_to_json(knob, lo_v);
      entry["max"] = value_to_json(knob, hi_v);
    }
    out.push_back(std::move(entry));
    used.insert(name);
  }
  for (const auto& knob : space_.knobs()) {
    if (out.size() == k) break;
    if (used.count(knob.name) == 0) out.push_back({{"name", knob.name}});
  }
  return reply_with(out, "The most influential knobs for this workload:");
}

}  // namespace knobforge
