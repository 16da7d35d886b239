// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#include "knobforge/session.hpp"

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include <fmt/format.h>

#include "knobforge/error.hpp"

namespace knobforge {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

TunerBudget budget_from_json(const nlohmann::json& doc, TunerBudget fallback) {
  fallback.max_iterations = doc.value("max_iterations", fallback.max_iterations);
  fallback.init_points = doc.value("init_points", fallback.init_points);
  return fallback;
}

}  // namespace

std::string interpolate_env(const std::string& text) {
  static const std::regex var(R"(\$\{([A-Za-z_][A-Za-z0-9_]*)\})");
  std::string out;
  auto begin = std::sregex_iterator(text.begin(), text.end(), var);
  std::size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    out.append(text, last, static_cast<std::size_t>(m.position()) - last);
    const char* value = std::getenv(m[1].str().c_str());
    if (value == nullptr) {
      throw Error(ErrorCode::config_error, fmt::format("environment variable '{}' is not set", m[1].str()));
    }
    out += value;
    last = static_cast<std::size_t>(m.position() + m.length());
  }
  out.append(text, last);
  return out;
}

SessionConfig session_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                                std::string session_id) {
  SessionConfig cfg;
  cfg.base_dir = base_dir;
  try {
    if (!doc.is_object()) throw Error(ErrorCode::config_error, "session must be a JSON object");
    cfg.session_id = doc.value("session_id", session_id);
    cfg.catalog_path = resolve(base_dir, doc.at("catalog").get<std::string>());
    if (!std::filesystem::exists(cfg.catalog_path)) {
      throw Error(ErrorCode::config_error, fmt::format("catalog '{}' does not exist", cfg.catalog_path.string()));
    }
    const auto& target = doc.at("target");
    if (target.contains("simulator")) {
      cfg.surface_path = resolve(base_dir, target.at("simulator").get<std::string>());
      if (!std::filesystem::exists(*cfg.surface_path)) {
        throw Error(ErrorCode::config_error,
                    fmt::format("surface spec '{}' does not exist", cfg.surface_path->string()));
      }
    } else if (target.contains("external")) {
      cfg.hooks = hooks_from_json(target.at("external"));
      cfg.hooks->config_file = resolve(base_dir, cfg.hooks->config_file.string());
    } else {
      throw Error(ErrorCode::config_error, "target needs a 'simulator' or 'external' entry");
    }
    if (doc.contains("objective_kind")) {
      cfg.objective_kind = objective_kind_from_string(doc.at("objective_kind").get<std::string>());
      cfg.objective_kind_explicit = true;
    }
    if (cfg.hooks) cfg.hooks->objective_kind = cfg.objective_kind;
    if (doc.contains("environment")) cfg.environment = environment_from_json(doc.at("environment"));
    cfg.llm = doc.value("llm", nlohmann::json::object());
    if (doc.contains("budgets")) {
      const auto& b = doc.at("budgets");
      if (b.contains("tune")) cfg.budgets.tune = budget_from_json(b.at("tune"), cfg.budgets.tune);
      cfg.budgets.llm_rounds = b.value("llm_rounds", cfg.budgets.llm_rounds);
      cfg.budgets.prune_samples = b.value("prune_samples", cfg.budgets.prune_samples);
      cfg.budgets.shapley_permutations = b.value("shapley_permutations", cfg.budgets.shapley_permutations);
      cfg.budgets.init_max_attempts = b.value("init_max_attempts", cfg.budgets.init_max_attempts);
    }
    cfg.output_dir = resolve(base_dir, doc.value("output_dir", cfg.output_dir.string()));
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.budgets.tune.rng_seed = cfg.seed;
    cfg.coercion_policy = coercion_policy_from_string(doc.value("coercion_policy", std::string{"clamp_round"}));
    cfg.retries = doc.value("retries", cfg.retries);
    if (doc.contains("demonstration") && !doc.at("demonstration").is_null()) {
      cfg.demonstration = demonstration_from_json(doc.at("demonstration"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, fmt::format("session: {}", e.what()));
  }
  return cfg;
}

SessionConfig load_session(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, fmt::format("cannot open session '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto doc = nlohmann::json::parse(interpolate_env(buffer.str()), nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::config_error, fmt::format("session '{}' is not JSON", path.string()));
  return session_from_json(doc, path.parent_path(), path.stem().string());
}

Session::Session(SessionConfig config) : config_(std::move(config)), catalog_(load_catalog(config_.catalog_path)) {
  if (config_.surface_path) {
    surface_ = load_surface(*config_.surface_path);
    if (config_.objective_kind_explicit) {
      surface_->objective_kind = config_.objective_kind;
    } else {
      config_.objective_kind = surface_->objective_kind;
    }
    surface_->check(catalog_);
  }
}

std::unique_ptr<Target> Session::make_target() const {
  if (surface_) return std::make_unique<Simulator>(catalog_, *surface_);
  return std::make_unique<ExternalTarget>(catalog_, *config_.hooks);
}

std::unique_ptr<ChatClient> Session::make_client(const ConfigurationSpace& space) const {
  const auto& llm = config_.llm;
  try {
    if (llm.contains("mock")) {
      const auto& m = llm.at("mock");
      MockOptions opts;
      opts.policy = mock_policy_from_string(m.value("policy", std::string{"echo"}));
      opts.replies = m.value("replies", std::vector<std::string>{});
      opts.pressure_threshold = m.value("pressure_threshold", opts.pressure_threshold);
      opts.step_fraction = m.value("step_fraction", opts.step_fraction);
      opts.seed = m.value("seed", config_.seed);
      if (m.contains("hints")) {
        const auto& h = m.at("hints");
        if (h.is_string() && h.get<std::string>() == "surface") {
          if (!surface_) throw Error(ErrorCode::config_error, "mock hints 'surface' need a simulator target");
          opts.hints = hints_from_surface(*surface_);
        } else {
          for (const auto& [name, v] : h.items()) {
            opts.hints[name] = KnobHint{v.value("target", 0.5), v.value("weight", 1.0)};
          }
        }
      }
      return std::make_unique<MockLlm>(space, std::move(opts));
    }
    if (llm.contains("base_url")) {
      HttpClientOptions opts;
      opts.base_url = llm.at("base_url").get<std::string>();
      opts.model = llm.value("model", std::string{});
      opts.connect_timeout_seconds = llm.value("connect_timeout_seconds", opts.connect_timeout_seconds);
      opts.read_timeout_seconds = llm.value("read_timeout_seconds", opts.read_timeout_seconds);
      opts.api_key_env = llm.value("api_key_env", opts.api_key_env);
      return std::make_unique<HttpChatClient>(std::move(opts));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, fmt::format("session llm: {}", e.what()));
  }
  throw Error(ErrorCode::config_error, "session has no usable 'llm' entry (need 'mock' or 'base_url')");
}

AdvisorOptions Session::advisor_options() const {
  AdvisorOptions opts;
  opts.retries = config_.retries;
  opts.policy = config_.coercion_policy;
  opts.demonstration = config_.demonstration ? &*config_.demonstration : nullptr;
  return opts;
}

}  // namespace knobforge
