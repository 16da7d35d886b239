// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#include "knobforge/target.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>

#include "knobforge/error.hpp"

namespace knobforge {

std::string_view to_string(ObjectiveKind kind) {
  return kind == ObjectiveKind::throughput_tps ? "throughput_tps" : "latency_seconds";
}

ObjectiveKind objective_kind_from_string(std::string_view text) {
  if (text == "throughput_tps" || text == "tps" || text == "throughput") return ObjectiveKind::throughput_tps;
  if (text == "latency_seconds" || text == "latency") return ObjectiveKind::latency_seconds;
  throw Error(ErrorCode::config_error, fmt::format("unknown objective kind '{}'", text));
}

std::string_view to_string(EvalStatus status) {
  switch (status) {
    case EvalStatus::ok: return "ok";
    case EvalStatus::target_unavailable: return "target_unavailable";
    case EvalStatus::evaluation_timeout: return "evaluation_timeout";
    case EvalStatus::evaluation_failed: return "evaluation_failed";
  }
  return "evaluation_failed";
}

EvalStatus eval_status_from_string(std::string_view text) {
  if (text == "ok") return EvalStatus::ok;
  if (text == "target_unavailable") return EvalStatus::target_unavailable;
  if (text == "evaluation_timeout") return EvalStatus::evaluation_timeout;
  if (text == "evaluation_failed") return EvalStatus::evaluation_failed;
  throw Error(ErrorCode::parse_failure, fmt::format("unknown observation status '{}'", text));
}

std::string_view to_string(ResponseShape shape) {
  switch (shape) {
    case ResponseShape::quadratic: return "quadratic";
    case ResponseShape::saturating: return "saturating";
    case ResponseShape::step: return "step";
  }
  return "quadratic";
}

ResponseShape response_shape_from_string(std::string_view text) {
  if (text == "quadratic") return ResponseShape::quadratic;
  if (text == "saturating") return ResponseShape::saturating;
  if (text == "step") return ResponseShape::step;
  throw Error(ErrorCode::config_error, fmt::format("unknown response shape '{}'", text));
}

void SynthSurfaceSpec::check(const ConfigurationSpace& space) const {
  double total = 0.0;
  for (const auto& k : important_knobs) {
    if (space.find(k.name) == nullptr) {
      throw Error(ErrorCode::config_error, fmt::format("surface knob '{}' not in catalog", k.name));
    }
    if (k.weight < 0.0) throw Error(ErrorCode::config_error, fmt::format("negative weight on '{}'", k.name));
    if (k.optimum < 0.0 || k.optimum > 1.0) {
      throw Error(ErrorCode::config_error, fmt::format("optimum of '{}' outside [0,1]", k.name));
    }
    total += k.weight;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::config_error, "surface needs positive total weight");
  for (const auto& p : interaction_pairs) {
    if (space.find(p.first) == nullptr || space.find(p.second) == nullptr) {
      throw Error(ErrorCode::config_error,
                  fmt::format("interaction {}x{} names an unknown knob", p.first, p.second));
    }
  }
  if (noise_sd < 0.0) throw Error(ErrorCode::config_error, "noise_sd must be >= 0");
  if (!(base_objective > 0.0)) throw Error(ErrorCode::config_error, "base_objective must be > 0");
  if (!(latency_scale > 0.0)) throw Error(ErrorCode::config_error, "latency_scale must be > 0");
}

double shape_value(ResponseShape shape, double x, double optimum) {
  switch (shape) {
    case ResponseShape::quadratic:
      return std::max(0.0, 1.0 - 4.0 * (x - optimum) * (x - optimum));
    case ResponseShape::saturating:
      return optimum > 0.0 ? std::min(1.0, x / optimum) : 1.0;
    case ResponseShape::step:
      return x >= optimum ? 1.0 : 0.0;
  }
  return 0.0;
}

namespace {

double coordinate(const ConfigurationSpace& space, const std::vector<double>& point,
                  const std::string& name) {
  return point[*space.index_of(name)];
}

std::vector<double> full_point(const ConfigurationSpace& space, const Configuration& config) {
  return normalize(space, expand_to(space, config));
}

}  // namespace

double surface_value(const SynthSurfaceSpec& spec, const ConfigurationSpace& space,
                     const Configuration& config) {
  const auto x = full_point(space, config);
  double value = spec.base_objective;
  for (const auto& k : spec.important_knobs) {
    value += k.weight * shape_value(k.shape, coordinate(space, x, k.name), k.optimum);
  }
  for (const auto& p : spec.interaction_pairs) {
    value += p.weight * coordinate(space, x, p.first) * coordinate(space, x, p.second);
  }
  return value;
}

double synth_objective(const SynthSurfaceSpec& spec, const ConfigurationSpace& space,
                       const Configuration& config, std::mt19937_64* rng) {
  double value = surface_value(spec, space, config);
  if (rng != nullptr && spec.noise_sd > 0.0) {
    std::normal_distribution<double> noise(0.0, spec.noise_sd);
    value += noise(*rng);
  }
  if (spec.objective_kind == ObjectiveKind::latency_seconds) {
    return spec.latency_scale / std::max(value, 1e-9);
  }
  return std::max(value, 1e-9);
}

std::map<std::string, double> synth_internal_metrics(const SynthSurfaceSpec& spec,
                                                     const ConfigurationSpace& space,
                                                     const Configuration& config,
                                                     double objective) {
  const auto x = full_point(space, config);
  std::map<std::string, double> metrics;
  for (const auto& k : spec.important_knobs) {
    metrics[k.name + "_pressure"] = 1.0 - shape_value(k.shape, coordinate(space, x, k.name), k.optimum);
  }
  metrics["objective_echo"] = objective;
  return metrics;
}

SynthSurfaceSpec surface_from_json(const nlohmann::json& doc) {
  SynthSurfaceSpec spec;
  try {
    spec.seed = doc.value("seed", std::uint64_t{0});
    for (const auto& e : doc.at("important_knobs")) {
      ImportantKnob k;
      k.name = e.at("name").get<std::string>();
      k.weight = e.at("weight").get<double>();
      k.optimum = e.at("optimum").get<double>();
      k.shape = response_shape_from_string(e.value("shape", std::string{"quadratic"}));
      spec.important_knobs.push_back(std::move(k));
    }
    if (doc.contains("interaction_pairs")) {
      for (const auto& e : doc.at("interaction_pairs")) {
        spec.interaction_pairs.push_back(
            {e.at("first").get<std::string>(), e.at("second").get<std::string>(), e.at("weight").get<double>()});
      }
    }
    spec.noise_sd = doc.value("noise_sd", 0.0);
    spec.base_objective = doc.value("base_objective", 1.0);
    spec.objective_kind = objective_kind_from_string(doc.value("objective_kind", std::string{"throughput_tps"}));
    spec.latency_scale = doc.value("latency_scale", 1.0e4);
    spec.eval_duration_seconds = doc.value("eval_duration_seconds", 120.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, fmt::format("surface spec: {}", e.what()));
  }
  return spec;
}

nlohmann::json surface_to_json(const SynthSurfaceSpec& spec) {
  nlohmann::json doc;
  doc["seed"] = spec.seed;
  doc["important_knobs"] = nlohmann::json::array();
  for (const auto& k : spec.important_knobs) {
    doc["important_knobs"].push_back(
        {{"name", k.name}, {"weight", k.weight}, {"optimum", k.optimum}, {"shape", std::string(to_string(k.shape))}});
  }
  doc["interaction_pairs"] = nlohmann::json::array();
  for (const auto& p : spec.interaction_pairs) {
    doc["interaction_pairs"].push_back({{"first", p.first}, {"second", p.second}, {"weight", p.weight}});
  }
  doc["noise_sd"] = spec.noise_sd;
  doc["base_objective"] = spec.base_objective;
  doc["objective_kind"] = std::string(to_string(spec.objective_kind));
  doc["latency_scale"] = spec.latency_scale;
  doc["eval_duration_seconds"] = spec.eval_duration_seconds;
  return doc;
}

SynthSurfaceSpec load_surface(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, fmt::format("cannot open surface spec '{}'", path.string()));
  try {
    return surface_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::config_error, fmt::format("surface spec '{}': {}", path.string(), e.what()));
  }
}

Simulator::Simulator(ConfigurationSpace space, SynthSurfaceSpec spec)
    : space_(std::move(space)), spec_(std::move(spec)), rng_(spec_.seed) {
  spec_.check(space_);
}

EvalOutcome Simulator::evaluate(const Configuration& config) {
  const Configuration full = expand_to(space_, config);
  if (!is_valid(space_, full)) {
    return {EvalStatus::target_unavailable, std::nullopt, "configuration rejected by simulator"};
  }
  Feedback fb;
  fb.kind = spec_.objective_kind;
  fb.objective = synth_objective(spec_, space_, full, &rng_);
  fb.internal_metrics = synth_internal_metrics(spec_, space_, full, fb.objective);
  fb.eval_duration_seconds = spec_.eval_duration_seconds;
  clock_ += spec_.eval_duration_seconds;
  return {EvalStatus::ok, std::move(fb), {}};
}

Configuration Simulator::oracle_configuration() const {
  auto point = normalize(space_, space_.defaults());
  for (const auto& k : spec_.important_knobs) point[*space_.index_of(k.name)] = k.optimum;
  Configuration config = denormalize(space_, point);
  // Step knobs need x >= optimum; integer rounding may land just below.
  for (const auto& k : spec_.important_knobs) {
    const Knob& knob = space_.knob(k.name);
    if (k.shape != ResponseShape::quadratic && knob.type == KnobType::integer) {
      const double v = knob.min + std::ceil(k.optimum * (knob.max - knob.min) - 1e-12);
      config.set(k.name, std::clamp(v, knob.min, knob.max));
    }
  }
  return config;
}

double Simulator::oracle_objective() const {
  return synth_objective(spec_, space_, oracle_configuration(), nullptr);
}

// ---------------------------------------------------------------------------

CommandResult run_command(const std::string& command, double timeout_seconds) {
  CommandResult result;
  int fds[2];
  if (pipe(fds) != 0) {
    result.exit_code = -1;
    result.output = "pipe() failed";
    return result;
  }
  const pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    result.exit_code = -1;
    result.output = "fork() failed";
    return result;
  }
  if (pid == 0) {
    setpgid(0, 0);
    dup2(fds[1], STDOUT_FILENO);
    close(fds[0]);
    close(fds[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(fds[1]);
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration<double>(timeout_seconds > 0 ? timeout_seconds : 1e9);
  char buffer[4096];
  for (;;) {
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      result.timed_out = true;
      break;
    }
    pollfd pfd{fds[0], POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining.count(), 1000)));
    if (ready < 0 && errno != EINTR) break;
    if (ready <= 0) continue;
    const ssize_t n = read(fds[0], buffer, sizeof buffer);
    if (n <= 0) break;
    result.output.append(buffer, static_cast<std::size_t>(n));
  }
  close(fds[0]);
  if (result.timed_out) kill(-pid, SIGKILL);
  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (result.timed_out) {
    result.exit_code = -1;
  } else if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else {
    result.exit_code = 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
  }
  return result;
}

ExternalHooks hooks_from_json(const nlohmann::json& doc) {
  ExternalHooks hooks;
  try {
    hooks.apply = doc.value("apply", std::string{});
    hooks.restart = doc.value("restart", std::string{});
    hooks.benchmark = doc.at("benchmark").get<std::string>();
    hooks.metrics = doc.value("metrics", std::string{});
    hooks.objective_pattern = doc.value("objective_pattern", hooks.objective_pattern);
    hooks.config_file = doc.value("config_file", hooks.config_file.string());
    hooks.config_format = doc.value("config_format", hooks.config_format);
    hooks.config_section = doc.value("config_section", hooks.config_section);
    hooks.timeout_seconds = doc.value("timeout_seconds", hooks.timeout_seconds);
    hooks.objective_kind = objective_kind_from_string(doc.value("objective_kind", std::string{"throughput_tps"}));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, fmt::format("external target hooks: {}", e.what()));
  }
  if (hooks.config_format != "ini" && hooks.config_format != "json") {
    throw Error(ErrorCode::config_error, fmt::format("unknown config_format '{}'", hooks.config_format));
  }
  return hooks;
}

ExternalTarget::ExternalTarget(ConfigurationSpace space, ExternalHooks hooks)
    : space_(std::move(space)), hooks_(std::move(hooks)) {
  try {
    std::regex probe(hooks_.objective_pattern);
    if (probe.mark_count() < 1) {
      throw Error(ErrorCode::config_error, "objective_pattern needs one capture group");
    }
  } catch (const std::regex_error& e) {
    throw Error(ErrorCode::config_error, fmt::format("objective_pattern: {}", e.what()));
  }
}

double ExternalTarget::now() const {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

namespace {

std::string substitute(std::string text, std::string_view key, std::string_view value) {
  const std::string token = fmt::format("{{{}}}", key);
  for (auto pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos + value.size())) {
    text.replace(pos, token.size(), value);
  }
  return text;
}

std::optional<double> to_double(std::string_view text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

std::map<std::string, double> parse_metrics_output(const std::string& text) {
  std::map<std::string, double> metrics;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    const auto doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_object()) {
      for (const auto& [k, v] : doc.items()) {
        if (v.is_number()) metrics[k] = v.get<double>();
      }
      return metrics;
    }
  }
  static const std::regex line_re(R"(^\s*([A-Za-z_][A-Za-z0-9_.]*)\s*[:=\s]\s*(\S+)\s*$)");
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    if (!std::regex_match(line, m, line_re)) continue;
    if (auto v = to_double(m[2].str())) metrics[m[1].str()] = *v;
  }
  return metrics;
}

EvalOutcome ExternalTarget::evaluate(const Configuration& config) {
  const auto started = std::chrono::steady_clock::now();
  const Configuration full = expand_to(space_, config);
  const std::string config_file = hooks_.config_file.string();

  {
    std::ofstream out(hooks_.config_file);
    if (!out) return {EvalStatus::target_unavailable, std::nullopt, "cannot write config file " + config_file};
    if (hooks_.config_format == "json") {
      out << to_json(space_, full).dump(2) << '\n';
    } else {
      if (!hooks_.config_section.empty()) out << '[' << hooks_.config_section << "]\n";
      for (const auto& knob : space_.knobs()) {
        out << knob.name << " = " << format_value(knob, full.at(knob.name)) << '\n';
      }
    }
  }

  auto run = [&](const std::string& command, std::string_view hook) -> std::optional<EvalOutcome> {
    const auto r = run_command(command, hooks_.timeout_seconds);
    if (r.timed_out) {
      return EvalOutcome{EvalStatus::evaluation_timeout, std::nullopt, fmt::format("{} hook timed out", hook)};
    }
    if (r.exit_code != 0) {
      return EvalOutcome{EvalStatus::target_unavailable, std::nullopt,
                         fmt::format("{} hook exited with {}", hook, r.exit_code)};
    }
    return std::nullopt;
  };

  if (!hooks_.apply.empty()) {
    const bool per_knob = hooks_.apply.find("{knob_name}") != std::string::npos ||
                          hooks_.apply.find("{knob_value}") != std::string::npos;
    if (per_knob) {
      for (const auto& knob : space_.knobs()) {
        std::string cmd = substitute(hooks_.apply, "config_file", config_file);
        cmd = substitute(cmd, "knob_name", knob.name);
        cmd = substitute(cmd, "knob_value", format_value(knob, full.at(knob.name)));
        if (auto failure = run(cmd, "apply")) return *failure;
      }
    } else if (auto failure = run(substitute(hooks_.apply, "config_file", config_file), "apply")) {
      return *failure;
    }
  }
  if (!hooks_.restart.empty()) {
    if (auto failure = run(substitute(hooks_.restart, "config_file", config_file), "restart")) return *failure;
  }

  const auto bench = run_command(substitute(hooks_.benchmark, "config_file", config_file), hooks_.timeout_seconds);
  if (bench.timed_out) return {EvalStatus::evaluation_timeout, std::nullopt, "benchmark hook timed out"};
  if (bench.exit_code != 0) {
    return {EvalStatus::target_unavailable, std::nullopt,
            fmt::format("benchmark hook exited with {}", bench.exit_code)};
  }
  const std::regex pattern(hooks_.objective_pattern);
  std::smatch match;
  std::optional<double> objective;
  if (std::regex_search(bench.output, match, pattern)) objective = to_double(match[1].str());
  if (!objective || *objective <= 0.0) {
    return {EvalStatus::evaluation_failed, std::nullopt, "benchmark output did not match objective_pattern"};
  }

  Feedback fb;
  fb.kind = hooks_.objective_kind;
  fb.objective = *objective;
  if (!hooks_.metrics.empty()) {
    const auto m = run_command(substitute(hooks_.metrics, "config_file", config_file), hooks_.timeout_seconds);
    if (m.timed_out) return {EvalStatus::evaluation_timeout, std::nullopt, "metrics hook timed out"};
    if (m.exit_code != 0) {
      return {EvalStatus::target_unavailable, std::nullopt, fmt::format("metrics hook exited with {}", m.exit_code)};
    }
    fb.internal_metrics = parse_metrics_output(m.output);
  }
  fb.eval_duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {EvalStatus::ok, std::move(fb), {}};
}

}  // namespace knobforge
