// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#include "knobforge/advisor.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "knobforge/error.hpp"

namespace knobforge {

namespace {

std::string gib(std::int64_t bytes) {
  return fmt::format("{:.2f} GiB", static_cast<double>(bytes) / static_cast<double>(1LL << 30));
}

std::string range_text(const Knob& k) {
  switch (k.type) {
    case KnobType::integer:
    case KnobType::real: {
      std::string r = fmt::format("[{}, {}]", format_value(k, k.min), format_value(k, k.max));
      if (!k.unit.empty()) r += " " + k.unit;
      return r;
    }
    case KnobType::enumeration: {
      std::string r = "{";
      for (std::size_t i = 0; i < k.choices.size(); ++i) r += (i ? ", " : "") + k.choices[i];
      return r + "}";
    }
    case KnobType::boolean:
      return "{true, false}";
  }
  return {};
}

std::string knob_line(const Knob& k) {
  std::string line = fmt::format("- {} ({}, range {}, default {})", k.name, to_string(k.type), range_text(k),
                                 format_value(k, k.default_value));
  if (!k.description.empty()) line += ": " + k.description;
  if (k.restart_required) line += " Requires a restart.";
  return line;
}

std::string objective_goal(ObjectiveKind kind) {
  return maximizes(kind) ? "maximize throughput (transactions per second)"
                         : "minimize workload latency (seconds)";
}

std::string workload_text(const EnvironmentInfo& env) {
  std::string text = fmt::format(
      "Workload type: {}\nRead-write ratio: {:.2f} (fraction of operations that are reads)\nData size: {}",
      env.workload_type == WorkloadType::OLTP ? "OLTP" : "OLAP", env.read_write_ratio, gib(env.data_size_bytes));
  if (!env.extra.empty()) text += "\n" + env.extra;
  return text;
}

std::string config_block(const ConfigurationSpace& space, const Configuration& config) {
  return to_json(space, config).dump(2);
}

std::string metrics_block(const std::map<std::string, double>& metrics) {
  std::string text;
  for (const auto& [name, v] : metrics) text += fmt::format("{}: {}\n", name, v);
  if (!text.empty()) text.pop_back();
  return text;
}

std::string config_output_format() {
  return "Reply with one JSON object that maps each tunable knob name to its recommended final value, "
         "for example {\"knob_a\": 1024, \"knob_b\": \"ON\"}. Write the final values directly, not "
         "increments or directions of change. Integer knobs take whole numbers inside their range, "
         "enumeration knobs take one of their listed values, and knobs you leave out keep their current "
         "value.";
}

std::string pruning_output_format(std::size_t k) {
  return fmt::format(
      "Reply with a JSON array of exactly {} entries, most important first. Each entry is "
      "{{\"name\": <knob>, \"min\": <lower bound>, \"max\": <upper bound>}} for numeric knobs or "
      "{{\"name\": <knob>, \"choices\": [<values>]}} for enumeration and boolean knobs. Ranges must lie "
      "inside the allowed range of the knob.",
      k);
}

std::string demonstration_text(const ConfigurationSpace& space, const Demonstration* demo) {
  if (demo == nullptr) return "No demonstration is available for this workload.";
  return fmt::format("Current configuration:\n{}\nInternal metrics:\n{}\nRefined configuration:\n{}",
                     to_json(space, demo->current).dump(2), metrics_block(demo->metrics),
                     to_json(space, demo->refined).dump(2));
}

ChatRequest make_request(const ChatClient& client, const std::string& prompt, double temperature, double top_p,
                         int max_tokens) {
  ChatRequest req;
  req.model = client.model();
  req.messages = {{"system", system_message()}, {"user", prompt}};
  req.temperature = temperature;
  req.top_p = top_p;
  req.max_tokens = max_tokens;
  return req;
}

std::string corrective(const std::string& prompt, const std::string& problem, const std::string& format) {
  return fmt::format("{}\n\nYour previous reply could not be used ({}). Answer again and follow the Output "
                     "Format exactly:\n{}",
                     prompt, problem, format);
}

}  // namespace

void EnvironmentInfo::check() const {
  if (cpu_count < 1) throw Error(ErrorCode::config_error, "environment: cpu_count must be >= 1");
  if (memory_bytes <= 0) throw Error(ErrorCode::config_error, "environment: memory_bytes must be > 0");
  if (read_write_ratio < 0.0 || read_write_ratio > 1.0) {
    throw Error(ErrorCode::config_error, "environment: read_write_ratio must be in [0,1]");
  }
}

EnvironmentInfo environment_from_json(const nlohmann::json& doc) {
  EnvironmentInfo env;
  try {
    env.engine_name = doc.value("engine_name", env.engine_name);
    env.engine_version = doc.value("engine_version", env.engine_version);
    env.cpu_count = doc.value("cpu_count", env.cpu_count);
    env.memory_bytes = doc.value("memory_bytes", env.memory_bytes);
    const std::string wt = doc.value("workload_type", std::string{"OLTP"});
    if (wt == "OLTP") {
      env.workload_type = WorkloadType::OLTP;
    } else if (wt == "OLAP") {
      env.workload_type = WorkloadType::OLAP;
    } else {
      throw Error(ErrorCode::config_error, fmt::format("environment: unknown workload_type '{}'", wt));
    }
    env.read_write_ratio = doc.value("read_write_ratio", env.read_write_ratio);
    env.data_size_bytes = doc.value("data_size_bytes", env.data_size_bytes);
    env.extra = doc.value("extra", env.extra);
    if (doc.contains("metric_descriptions")) {
      env.metric_descriptions = doc.at("metric_descriptions").get<std::map<std::string, std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, fmt::format("environment: {}", e.what()));
  }
  env.check();
  return env;
}

nlohmann::json environment_to_json(const EnvironmentInfo& env) {
  return {{"engine_name", env.engine_name},
          {"engine_version", env.engine_version},
          {"cpu_count", env.cpu_count},
          {"memory_bytes", env.memory_bytes},
          {"workload_type", env.workload_type == WorkloadType::OLTP ? "OLTP" : "OLAP"},
          {"read_write_ratio", env.read_write_ratio},
          {"data_size_bytes", env.data_size_bytes},
          {"extra", env.extra},
          {"metric_descriptions", env.metric_descriptions}};
}

PromptBundle make_prompt(std::vector<std::pair<std::string, std::string>> sections) {
  PromptBundle bundle;
  for (const auto& [name, text] : sections) {
    if (!bundle.rendered.empty()) bundle.rendered += "\n\n";
    bundle.rendered += fmt::format("### {}\n{}", name, text);
  }
  bundle.rendered += "\n";
  bundle.sections = std::move(sections);
  return bundle;
}

std::optional<std::string> prompt_section(std::string_view rendered, std::string_view name) {
  const std::string header = fmt::format("### {}\n", name);
  std::size_t start = std::string_view::npos;
  for (auto pos = rendered.find(header); pos != std::string_view::npos; pos = rendered.find(header, pos + 1)) {
    if (pos == 0 || rendered[pos - 1] == '\n') {
      start = pos + header.size();
      break;
    }
  }
  if (start == std::string_view::npos) return std::nullopt;
  auto end = rendered.find("\n\n### ", start);
  // A corrective suffix may follow the last section.
  const auto suffix = rendered.find("\n\nYour previous reply could not be used", start);
  end = std::min(end, suffix);
  std::string_view body = rendered.substr(start, end == std::string_view::npos ? rendered.size() - start : end - start);
  while (!body.empty() && body.back() == '\n') body.remove_suffix(1);
  return std::string(body);
}

Demonstration demonstration_from_json(const nlohmann::json& doc) {
  Demonstration demo;
  try {
    for (const auto& [k, v] : doc.at("current").items()) {
      if (v.is_boolean()) demo.current.set(k, v.get<bool>());
      else if (v.is_number()) demo.current.set(k, v.get<double>());
      else demo.current.set(k, v.get<std::string>());
    }
    for (const auto& [k, v] : doc.at("refined").items()) {
      if (v.is_boolean()) demo.refined.set(k, v.get<bool>());
      else if (v.is_number()) demo.refined.set(k, v.get<double>());
      else demo.refined.set(k, v.get<std::string>());
    }
    if (doc.contains("metrics")) demo.metrics = doc.at("metrics").get<std::map<std::string, double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, fmt::format("demonstration: {}", e.what()));
  }
  return demo;
}

PromptBundle build_pruning_prompt(const ConfigurationSpace& space, const EnvironmentInfo& env, std::size_t k) {
  if (k < 1 || k > space.dimension()) {
    throw Error(ErrorCode::invalid_k, fmt::format("k={} outside [1, {}]", k, space.dimension()));
  }
  std::string candidates;
  for (const auto& knob : space.knobs()) candidates += knob_line(knob) + "\n";
  candidates.pop_back();
  std::string task = fmt::format(
      "You are an experienced database administrator. From the {} candidate knobs below, choose the {} "
      "knobs that matter most for the performance of this workload on this database, and for each chosen "
      "knob give the value range worth searching.",
      space.dimension(), k);
  std::string info = fmt::format("Database engine: {} {}\nHardware: {} CPUs, {} memory\n{}", env.engine_name,
                                 env.engine_version, env.cpu_count, gib(env.memory_bytes), workload_text(env));
  return make_prompt({{std::string(kPruningSections[0]), std::move(task)},
                      {std::string(kPruningSections[1]), std::move(candidates)},
                      {std::string(kPruningSections[2]), std::move(info)},
                      {std::string(kPruningSections[3]), pruning_output_format(k)}});
}

PromptBundle build_recommendation_prompt(const ConfigurationSpace& space, const EnvironmentInfo& env,
                                         const Configuration& current, const Feedback& feedback,
                                         const Demonstration* demonstration, RecommendationTask task) {
  std::string task_text =
      task == RecommendationTask::initialization
          ? fmt::format("You are an experienced database administrator. Recommend a configuration for the {} "
                        "knobs listed under Environment that you expect to {} for the workload described "
                        "below. The current configuration is the default; change only the knobs that need "
                        "changing.",
                        space.dimension(), objective_goal(feedback.kind))
          : fmt::format("You are an experienced database administrator. Using the database feedback observed "
                        "under the current configuration, refine the {} knobs listed under Environment to {}. "
                        "Change only the knobs that need changing.",
                        space.dimension(), objective_goal(feedback.kind));

  std::string environment = fmt::format("Database engine: {} {}\nHardware: {} CPUs, {} memory\n\nTunable knobs:",
                                        env.engine_name, env.engine_version, env.cpu_count, gib(env.memory_bytes));
  for (const auto& knob : space.knobs()) environment += "\n" + knob_line(knob);
  if (!feedback.internal_metrics.empty()) {
    environment += "\n\nInternal metrics:";
    for (const auto& [name, value] : feedback.internal_metrics) {
      auto it = env.metric_descriptions.find(name);
      environment += "\n- " + name;
      if (it != env.metric_descriptions.end()) environment += ": " + it->second;
    }
  }

  std::string fb = fmt::format("{}: {}", to_string(feedback.kind), feedback.objective);
  if (!feedback.internal_metrics.empty()) fb += "\n" + metrics_block(feedback.internal_metrics);

  return make_prompt({{std::string(kRecommendationSections[0]), std::move(task_text)},
                      {std::string(kRecommendationSections[1]), demonstration_text(space, demonstration)},
                      {std::string(kRecommendationSections[2]), std::move(environment)},
                      {std::string(kRecommendationSections[3]), workload_text(env)},
                      {std::string(kRecommendationSections[4]), config_output_format()},
                      {std::string(kRecommendationSections[5]), config_block(space, current)},
                      {std::string(kRecommendationSections[6]), std::move(fb)}});
}

nlohmann::json chat_request_to_json(const ChatRequest& request) {
  nlohmann::json doc;
  doc["model"] = request.model;
  doc["messages"] = nlohmann::json::array();
  for (const auto& m : request.messages) doc["messages"].push_back({{"role", m.role}, {"content", m.content}});
  doc["temperature"] = request.temperature;
  doc["top_p"] = request.top_p;
  doc["max_tokens"] = request.max_tokens;
  return doc;
}

std::string chat_response_content(const nlohmann::json& response) {
  try {
    const auto& content = response.at("choices").at(0).at("message").at("content");
    if (content.is_null()) return {};
    return content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::llm_unavailable, fmt::format("malformed chat completion response: {}", e.what()));
  }
}

std::optional<nlohmann::json> extract_json(std::string_view text) {
  for (std::size_t start = 0; start < text.size(); ++start) {
    const char open = text[start];
    if (open != '{' && open != '[') continue;
    std::vector<char> stack{open};
    bool in_string = false;
    bool escaped = false;
    std::size_t i = start + 1;
    for (; i < text.size() && !stack.empty(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{' || c == '[') {
        stack.push_back(c);
      } else if (c == '}' || c == ']') {
        const char want = c == '}' ? '{' : '[';
        if (stack.back() != want) break;
        stack.pop_back();
      }
    }
    if (!stack.empty()) continue;
    auto doc = nlohmann::json::parse(text.substr(start, i - start), nullptr, false);
    if (!doc.is_discarded()) return doc;
  }
  return std::nullopt;
}

ParsedConfig parse_config_response(const ConfigurationSpace& space, std::string_view raw_text, CoercionPolicy policy,
                                   const Configuration* base) {
  auto doc = extract_json(raw_text);
  if (!doc) throw Error(ErrorCode::parse_failure, "reply contains no balanced JSON");
  if (doc->is_object() && doc->size() == 1 && doc->begin().value().is_object() &&
      space.find(doc->begin().key()) == nullptr) {
    // {"configuration": {...}} style wrappers.
    doc = doc->begin().value();
  }
  if (!doc->is_object()) throw Error(ErrorCode::parse_failure, "reply JSON is not an object");
  CoercionResult result = policy == CoercionPolicy::reject
                              ? [&] {
                                  // Under reject, unmentioned knobs still come from the base.
                                  nlohmann::json full = to_json(space, base ? *base : space.defaults());
                                  for (const auto& [k, v] : doc->items()) full[k] = v;
                                  return validate_configuration(space, full);
                                }()
                              : coerce_configuration(space, *doc, policy, base);
  if (!result.ok()) {
    std::string problems;
    for (const auto& v : result.violations) {
      problems += fmt::format("{}{} on '{}': {}", problems.empty() ? "" : "; ", to_string(v.kind), v.knob, v.detail);
    }
    throw Error(ErrorCode::parse_failure, problems);
  }
  return {std::move(*result.config), std::move(result.log)};
}

PrunedSpace parse_pruning_response(const ConfigurationSpace& space, std::string_view raw_text, std::size_t k) {
  auto doc = extract_json(raw_text);
  if (!doc) throw Error(ErrorCode::parse_failure, "reply contains no balanced JSON");
  if (doc->is_object()) {
    for (const auto& [key, value] : doc->items()) {
      if (value.is_array()) {
        doc = value;
        break;
      }
    }
  }
  if (!doc->is_array()) throw Error(ErrorCode::parse_failure, "reply JSON is not an array of knobs");

  PrunedSpace pruned;
  pruned.parent = space;
  for (const auto& entry : *doc) {
    if (pruned.selected.size() == k) break;
    std::string name;
    if (entry.is_string()) {
      name = entry.get<std::string>();
    } else if (entry.is_object() && entry.contains("name") && entry.at("name").is_string()) {
      name = entry.at("name").get<std::string>();
    } else {
      continue;
    }
    const Knob* knob = space.find(name);
    if (knob == nullptr) continue;
    if (std::find(pruned.selected.begin(), pruned.selected.end(), name) != pruned.selected.end()) continue;

    Narrowing n;
    if (knob->is_numeric()) {
      n.min = knob->min;
      n.max = knob->max;
      if (entry.is_object() && entry.contains("min") && entry.contains("max") && entry.at("min").is_number() &&
          entry.at("max").is_number()) {
        double lo = entry.at("min").get<double>();
        double hi = entry.at("max").get<double>();
        if (lo > hi) std::swap(lo, hi);
        lo = std::max(lo, knob->min);
        hi = std::min(hi, knob->max);
        if (knob->type == KnobType::integer) {
          lo = std::ceil(lo);
          hi = std::floor(hi);
        }
        if (lo < hi) {
          n.min = lo;
          n.max = hi;
        }
      }
    } else {
      const std::vector<std::string> all =
          knob->type == KnobType::boolean ? std::vector<std::string>{"true", "false"} : knob->choices;
      if (entry.is_object() && entry.contains("choices") && entry.at("choices").is_array()) {
        for (const auto& c : entry.at("choices")) {
          std::string s = c.is_string() ? c.get<std::string>() : c.dump();
          if (knob->type == KnobType::boolean) {
            if (s == "ON" || s == "on" || s == "1") s = "true";
            if (s == "OFF" || s == "off" || s == "0") s = "false";
          }
          if (std::find(all.begin(), all.end(), s) != all.end() &&
              std::find(n.choices.begin(), n.choices.end(), s) == n.choices.end()) {
            n.choices.push_back(s);
          }
        }
      }
      if (n.choices.empty()) n.choices = all;
    }
    pruned.selected.push_back(name);
    pruned.narrowed.emplace(name, std::move(n));
  }
  if (pruned.selected.size() < k) {
    throw Error(ErrorCode::parse_failure,
                fmt::format("reply names {} usable knobs, {} required", pruned.selected.size(), k));
  }
  pruned.check(k);
  return pruned;
}

std::string system_message() {
  return "You are a database tuning assistant. Follow the requested output format exactly.";
}

PrunedSpace llm_prune(ChatClient& client, const ConfigurationSpace& space, const EnvironmentInfo& env,
                      std::size_t k, const AdvisorOptions& options) {
  const PromptBundle prompt = build_pruning_prompt(space, env, k);
  std::string text = prompt.rendered;
  std::string last_error;
  for (int attempt = 0; attempt <= std::max(0, options.retries); ++attempt) {
    const ChatRequest req = make_request(client, text, kDeterministicTemperature, 1.0, options.max_tokens);
    try {
      return parse_pruning_response(space, client.complete(req), k);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::parse_failure && e.code() != ErrorCode::invalid_space) throw;
      last_error = e.what();
      text = corrective(prompt.rendered, last_error, pruning_output_format(k));
    }
  }
  throw Error(ErrorCode::pruning_failed, fmt::format("pruning failed after {} attempts: {}",
                                                     std::max(0, options.retries) + 1, last_error));
}

InitSampling llm_sample_initial_configs(ChatClient& client, const ConfigurationSpace& space,
                                        const EnvironmentInfo& env, const Feedback& default_feedback,
                                        std::size_t u, int max_attempts, const AdvisorOptions& options) {
  if (u < 1) throw Error(ErrorCode::invalid_argument, "initial sampling needs u >= 1");
  const Configuration defaults = space.defaults();
  const PromptBundle prompt = build_recommendation_prompt(space, env, defaults, default_feedback,
                                                          options.demonstration, RecommendationTask::initialization);
  InitSampling out;
  while (out.configs.size() < u && out.attempts < max_attempts) {
    ++out.attempts;
    const ChatRequest req =
        make_request(client, prompt.rendered, kSamplingTemperature, kSamplingTopP, options.max_tokens);
    try {
      ParsedConfig parsed = parse_config_response(space, client.complete(req), options.policy, &defaults);
      if (std::find(out.configs.begin(), out.configs.end(), parsed.config) == out.configs.end()) {
        out.configs.push_back(std::move(parsed.config));
        out.logs.push_back(std::move(parsed.log));
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::parse_failure) throw;
    }
  }
  out.exhausted = out.configs.size() < u;
  return out;
}

RefineResult llm_refine_step(ChatClient& client, const ConfigurationSpace& space, const EnvironmentInfo& env,
                             const Configuration& current, const Feedback& feedback,
                             const AdvisorOptions& options) {
  const PromptBundle prompt = build_recommendation_prompt(space, env, current, feedback, options.demonstration,
                                                          RecommendationTask::refinement);
  std::string text = prompt.rendered;
  std::string last_error;
  RefineResult out;
  for (int attempt = 0; attempt <= std::max(0, options.retries); ++attempt) {
    ++out.attempts;
    const ChatRequest req = make_request(client, text, kDeterministicTemperature, 1.0, options.max_tokens);
    try {
      ParsedConfig parsed = parse_config_response(space, client.complete(req), options.policy, &current);
      out.config = std::move(parsed.config);
      out.log = std::move(parsed.log);
      return out;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::parse_failure) throw;
      last_error = e.what();
      text = corrective(prompt.rendered, last_error, config_output_format());
    }
  }
  throw Error(ErrorCode::refine_failed,
              fmt::format("refinement failed after {} attempts: {}", out.attempts, last_error));
}

}  // namespace knobforge
