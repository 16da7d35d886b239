// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#include "knobforge/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "knobforge/advisor.hpp"
#include "knobforge/error.hpp"
#include "knobforge/metrics.hpp"
#include "knobforge/optimize.hpp"
#include "knobforge/pruning.hpp"
#include "knobforge/session.hpp"

namespace knobforge {

namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::string session;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  bool quiet = false;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::target_unavailable:
    case ErrorCode::evaluation_timeout:
    case ErrorCode::evaluation_failed:
    case ErrorCode::insufficient_data:
      return kExitTarget;
    case ErrorCode::llm_unavailable:
    case ErrorCode::pruning_failed:
    case ErrorCode::refine_failed:
    case ErrorCode::script_exhausted:
    case ErrorCode::init_sampling_exhausted:
      return kExitLlm;
    case ErrorCode::invalid_k:
      return kExitUsage;
    case ErrorCode::mixed_objective_kinds:
    case ErrorCode::parse_failure:
    case ErrorCode::empty_history:
      return kExitData;
    default:
      return kExitConfig;
  }
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, fmt::format("cannot open '{}'", path.string()));
  auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::parse_failure, fmt::format("'{}' is not valid JSON", path.string()));
  return doc;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, fmt::format("cannot write '{}'", path.string()));
  out << text;
}

void write_json(const fs::path& path, const nlohmann::json& doc) { write_text(path, doc.dump(2) + "\n"); }

class Context {
 public:
  Context(const GlobalOptions& g, std::ostream& out, std::ostream& err) : out(out), err(err), quiet_(g.quiet) {
    if (g.session.empty()) throw Error(ErrorCode::config_error, "--session is required");
    SessionConfig cfg = load_session(g.session);
    if (g.seed) {
      cfg.seed = *g.seed;
      cfg.budgets.tune.rng_seed = *g.seed;
    }
    if (!g.output_dir.empty()) cfg.output_dir = g.output_dir;
    session.emplace(std::move(cfg));
    std::error_code ec;
    fs::create_directories(output_dir(), ec);
    if (ec) {
      throw Error(ErrorCode::io_error, fmt::format("cannot create output dir '{}': {}", output_dir().string(),
                                                   ec.message()));
    }
  }

  const fs::path& output_dir() const { return session->config().output_dir; }
  void note(const std::string& text) const {
    if (!quiet_) err << text << '\n';
  }

  std::ostream& out;
  std::ostream& err;
  std::optional<Session> session;

 private:
  bool quiet_;
};

// Writes the history line by line so an interrupted run can be resumed.
class JsonlWriter {
 public:
  JsonlWriter(const fs::path& path, const RunHistory& header) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error(ErrorCode::io_error, fmt::format("cannot write history '{}'", path.string()));
    kind_ = header.objective_kind;
    out_ << history_header(header).dump() << '\n';
    out_.flush();
  }
  void write(const Observation& obs) {
    out_ << observation_to_json(obs, kind_).dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
  ObjectiveKind kind_;
};

RunContext make_run_context(const Context& ctx, const std::string& label, const ConfigurationSpace& space,
                            JsonlWriter* writer, std::vector<Observation> replay = {}) {
  RunContext rc;
  rc.session_id = ctx.session->config().session_id;
  rc.method_label = label;
  rc.space_digest = space_digest(space);
  rc.replay = std::move(replay);
  rc.sink = [writer, &ctx](const Observation& obs) {
    if (writer != nullptr) writer->write(obs);
    ctx.note(obs.ok() ? fmt::format("iteration {:>4}  {}", obs.iteration, obs.feedback->objective)
                      : fmt::format("iteration {:>4}  {}", obs.iteration, to_string(obs.status)));
  };
  return rc;
}

RunHistory header_for(const Context& ctx, const std::string& label, const ConfigurationSpace& space) {
  RunHistory h;
  h.session_id = ctx.session->config().session_id;
  h.method_label = label;
  h.space_digest = space_digest(space);
  h.objective_kind = ctx.session->config().objective_kind;
  return h;
}

std::vector<Configuration> read_seeds(const fs::path& path, const ConfigurationSpace& space) {
  const nlohmann::json doc = read_json_file(path);
  const nlohmann::json& list = doc.is_object() ? doc.at("configs") : doc;
  std::vector<Configuration> seeds;
  for (const auto& entry : list) {
    CoercionResult r = coerce_configuration(space, entry, CoercionPolicy::clamp_round);
    if (!r.ok()) throw Error(ErrorCode::parse_failure, fmt::format("seed in '{}' is not usable", path.string()));
    if (std::find(seeds.begin(), seeds.end(), *r.config) == seeds.end()) seeds.push_back(std::move(*r.config));
  }
  return seeds;
}

int cmd_prune(Context& ctx, const std::string& method, int k, std::optional<std::size_t> samples,
              const std::string& reference_path) {
  const Session& s = *ctx.session;
  const ConfigurationSpace& space = s.catalog();
  if (k < 1 || static_cast<std::size_t>(k) > space.dimension()) {
    ctx.err << fmt::format("error: --k must be in [1, {}]\n", space.dimension());
    return kExitUsage;
  }
  const auto kk = static_cast<std::size_t>(k);
  PrunedSpace pruned;
  ImportanceRanking ranking;
  if (method == "llm") {
    auto client = s.make_client(space);
    pruned = llm_prune(*client, space, s.config().environment, kk, s.advisor_options());
    ranking = ranking_from_names("llm", RankingMethod::llm, pruned.selected);
  } else {
    auto target = s.make_target();
    const std::size_t n = samples.value_or(s.config().budgets.prune_samples);
    CollectedObservations data = collect_observations(*target, space, n, s.config().seed);
    if (data.failures > 0) ctx.note(fmt::format("{} of {} evaluations failed and were dropped", data.failures, n));
    ranking = shapley_importance(data.observations, space, s.config().budgets.shapley_permutations, s.config().seed);
    pruned = data_driven_pruned_space(space, ranking, data.observations, kk, s.config().objective_kind);
  }
  const fs::path pruned_path = ctx.output_dir() / fmt::format("pruned_{}.json", method);
  write_json(pruned_path, pruned_to_json(pruned));
  write_json(ctx.output_dir() / fmt::format("ranking_{}.json", method), ranking_to_json(ranking));
  ctx.out << fmt::format("selected {} knobs: {}\n", kk, fmt::join(pruned.selected, ", "));
  if (!reference_path.empty()) {
    ImportanceRanking reference = ranking_from_json(read_json_file(reference_path));
    if (reference.label.empty()) reference.label = "reference";
    const PruningReport report = pruning_report({ranking}, reference, kk);
    write_json(ctx.output_dir() / fmt::format("pruning_report_{}.json", method), pruning_report_to_json(report));
    const std::string text = pruning_report_to_text(report);
    write_text(ctx.output_dir() / fmt::format("pruning_report_{}.txt", method), text);
    ctx.out << text;
  }
  ctx.note(fmt::format("wrote {}", pruned_path.string()));
  return kExitOk;
}

RunHistory run_optimizer(const Context& ctx, const std::string& method, Target& target,
                         const ConfigurationSpace& space, const TunerBudget& budget,
                         const std::vector<Configuration>& seeds, const std::string& label, JsonlWriter* writer,
                         std::vector<Observation> replay = {}) {
  const RunContext rc = make_run_context(ctx, label, space, writer, std::move(replay));
  if (method == "vbo") return vbo_run(target, space, budget, seeds, {}, rc);
  return smac_run(target, space, budget, seeds, {}, rc);
}

int cmd_init(Context& ctx, int u, const std::string& then, std::optional<int> max_attempts) {
  const Session& s = *ctx.session;
  const ConfigurationSpace& space = s.catalog();
  if (u < 1) {
    ctx.err << "error: --u must be >= 1\n";
    return kExitUsage;
  }
  auto target = s.make_target();
  const EvalOutcome base = target->evaluate(space.defaults());
  if (!base.ok()) {
    throw Error(ErrorCode::target_unavailable, fmt::format("default configuration failed: {}", base.message));
  }
  auto client = s.make_client(space);
  const int attempts = max_attempts.value_or(std::max(s.config().budgets.init_max_attempts, 3 * u));
  InitSampling sampled = llm_sample_initial_configs(*client, space, s.config().environment, *base.feedback,
                                                    static_cast<std::size_t>(u), attempts, s.advisor_options());
  nlohmann::json configs = nlohmann::json::array();
  for (const auto& c : sampled.configs) configs.push_back(to_json(space, c));
  const fs::path seeds_path = ctx.output_dir() / "seeds.json";
  write_json(seeds_path, {{"session_id", s.config().session_id},
                          {"requested", u},
                          {"attempts", sampled.attempts},
                          {"exhausted", sampled.exhausted},
                          {"configs", configs}});
  ctx.out << fmt::format("sampled {} distinct configurations in {} attempts\n", sampled.configs.size(),
                         sampled.attempts);
  if (sampled.exhausted) {
    ctx.err << fmt::format("warning: only {} of {} distinct configurations after {} attempts; {} is flagged as "
                           "exhausted\n",
                           sampled.configs.size(), u, sampled.attempts, seeds_path.string());
  }
  if (then == "none" || sampled.configs.empty()) return kExitOk;

  TunerBudget budget = s.config().budgets.tune;
  budget.init_points = std::max(budget.init_points, static_cast<int>(sampled.configs.size()));
  budget.max_iterations = std::max(budget.max_iterations, budget.init_points);
  const std::string label = fmt::format("{}+LLM-init", then == "vbo" ? "VBO" : "SMAC");
  auto fresh = s.make_target();
  const fs::path history_path = ctx.output_dir() / fmt::format("init_{}.jsonl", then);
  JsonlWriter writer(history_path, header_for(ctx, label, space));
  const RunHistory history = run_optimizer(ctx, then, *fresh, space, budget, sampled.configs, label, &writer);
  ctx.out << report_to_text(comparison_report({history}));
  ctx.note(fmt::format("wrote {}", history_path.string()));
  return kExitOk;
}

int cmd_tune(Context& ctx, const std::string& method, std::optional<int> budget_opt, std::optional<int> init_points,
             const std::string& seeds_path, const std::string& pruned_path, const std::string& history_opt,
             bool resume) {
  const Session& s = *ctx.session;
  ConfigurationSpace space = s.catalog();
  if (!pruned_path.empty()) space = apply_pruned(pruned_from_json(s.catalog(), read_json_file(pruned_path)));
  std::vector<Configuration> seeds;
  if (!seeds_path.empty()) seeds = read_seeds(seeds_path, space);

  std::string label = method == "vbo" ? "VBO" : method == "smac" ? "SMAC" : "LLM";
  if (!seeds.empty()) label += "+seeded";
  if (!pruned_path.empty()) label += "+pruned";
  const fs::path history_path =
      history_opt.empty() ? ctx.output_dir() / fmt::format("tune_{}.jsonl", method) : fs::path(history_opt);

  std::vector<Observation> replay;
  if (resume && fs::exists(history_path)) {
    RunHistory previous = load_history(history_path);
    if (previous.space_digest != space_digest(space) || previous.method_label != label) {
      throw Error(ErrorCode::config_error,
                  fmt::format("'{}' was written by a different method or space; refusing to resume",
                              history_path.string()));
    }
    replay = std::move(previous.observations);
    ctx.note(fmt::format("resuming from {} recorded observations", replay.size()));
  }

  auto target = s.make_target();
  JsonlWriter writer(history_path, header_for(ctx, label, space));
  RunHistory history;
  if (method == "llm") {
    auto client = s.make_client(space);
    const int rounds = budget_opt.value_or(s.config().budgets.llm_rounds);
    history = llm_tuning_run(*target, space, s.config().environment, *client, rounds, s.advisor_options(),
                             make_run_context(ctx, label, space, &writer, std::move(replay)));
  } else {
    TunerBudget budget = s.config().budgets.tune;
    if (budget_opt) budget.max_iterations = *budget_opt;
    if (init_points) budget.init_points = *init_points;
    budget.init_points = std::max(budget.init_points, static_cast<int>(seeds.size()));
    budget.init_points = std::min(budget.init_points, budget.max_iterations);
    if (seeds.size() > static_cast<std::size_t>(budget.init_points)) seeds.resize(budget.init_points);
    history = run_optimizer(ctx, method, *target, space, budget, seeds, label, &writer, std::move(replay));
  }
  const ComparisonReport report = comparison_report({history});
  write_json(ctx.output_dir() / fmt::format("tune_{}_report.json", method), report_to_json(report));
  ctx.out << report_to_text(report);
  ctx.note(fmt::format("wrote {}", history_path.string()));
  return kExitOk;
}

int cmd_report(std::ostream& out, const std::vector<std::string>& files, const std::string& base,
               const std::string& json_path) {
  std::vector<RunHistory> histories;
  std::optional<std::size_t> base_index;
  if (!base.empty()) {
    histories.push_back(load_history(base));
    base_index = 0;
  }
  for (const auto& f : files) histories.push_back(load_history(f));
  const ComparisonReport report = comparison_report(histories, base_index);
  if (!json_path.empty()) write_json(json_path, report_to_json(report));
  out << report_to_text(report);
  return kExitOk;
}

int cmd_simulate(Context& ctx, const std::string& config_path) {
  const Session& s = *ctx.session;
  Configuration config = s.catalog().defaults();
  std::vector<Coercion> log;
  if (!config_path.empty()) {
    CoercionResult r = coerce_configuration(s.catalog(), read_json_file(config_path), s.config().coercion_policy);
    if (!r.ok()) {
      for (const auto& v : r.violations) ctx.err << fmt::format("{}: {}\n", v.knob, v.detail);
      throw Error(ErrorCode::parse_failure, "configuration is not valid for the catalog");
    }
    config = *r.config;
    log = r.log;
  }
  for (const auto& c : log) ctx.note(fmt::format("coerced {}: {}", c.knob, c.detail));
  auto target = s.make_target();
  const EvalOutcome outcome = target->evaluate(config);
  if (!outcome.ok()) {
    throw Error(ErrorCode::target_unavailable, fmt::format("{}: {}", to_string(outcome.status), outcome.message));
  }
  const Feedback& fb = *outcome.feedback;
  nlohmann::json doc{{"objective_kind", to_string(fb.kind)},
                     {"objective", fb.objective},
                     {"internal_metrics", fb.internal_metrics},
                     {"eval_duration_seconds", fb.eval_duration_seconds}};
  ctx.out << doc.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"knobforge: database knob tuning with LLM advisors and Bayesian optimization", "knobforge"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--session", g.session, "Session configuration JSON");
  app.add_option("--seed", g.seed, "Override the session seed");
  app.add_option("--output-dir", g.output_dir, "Override the session output directory");
  app.add_flag("--quiet", g.quiet, "Suppress progress messages");

  auto* prune = app.add_subcommand("prune", "Select the most important knobs");
  std::string prune_method = "llm";
  int k = 0;
  std::optional<std::size_t> samples;
  std::string reference;
  prune->add_option("--method", prune_method)->check(CLI::IsMember({"llm", "shapley"}));
  prune->add_option("--k", k, "Number of knobs to keep")->required();
  prune->add_option("--samples", samples, "LHS observations for --method shapley");
  prune->add_option("--reference", reference, "Ranking JSON to compare the selection against");

  auto* init = app.add_subcommand("init", "Sample initial configurations from the LLM");
  int u = 10;
  std::string then = "none";
  std::optional<int> max_attempts;
  init->add_option("--u", u, "Distinct configurations to sample");
  init->add_option("--then", then)->check(CLI::IsMember({"vbo", "smac", "none"}));
  init->add_option("--max-attempts", max_attempts);

  auto* tune = app.add_subcommand("tune", "Run a tuning loop");
  std::string tune_method = "vbo";
  std::optional<int> budget;
  std::optional<int> init_points;
  std::string seeds_file;
  std::string pruned_file;
  std::string history_file;
  bool resume = false;
  tune->add_option("--method", tune_method)->check(CLI::IsMember({"vbo", "smac", "llm"}));
  tune->add_option("--budget", budget, "Iterations after the default (refinement rounds for llm)");
  tune->add_option("--init-points", init_points);
  tune->add_option("--seeds", seeds_file, "Seeds JSON written by init");
  tune->add_option("--pruned", pruned_file, "Pruned-space JSON written by prune");
  tune->add_option("--history", history_file, "Output JSONL path");
  tune->add_flag("--resume", resume, "Continue an interrupted history file");

  auto* report = app.add_subcommand("report", "Compare run histories");
  std::vector<std::string> files;
  std::string base;
  std::string json_out;
  report->add_option("histories", files, "JSONL history files")->required();
  report->add_option("--base", base, "History the others are paired against for PE and Speedup");
  report->add_option("--json", json_out, "Also write the report as JSON");

  auto* simulate = app.add_subcommand("simulate", "Evaluate one configuration and print the feedback");
  std::string config_file;
  simulate->add_option("--config", config_file, "Configuration JSON (defaults when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (report->parsed()) return cmd_report(out, files, base, json_out);
    Context ctx(g, out, err);
    if (prune->parsed()) return cmd_prune(ctx, prune_method, k, samples, reference);
    if (init->parsed()) return cmd_init(ctx, u, then, max_attempts);
    if (tune->parsed()) {
      return cmd_tune(ctx, tune_method, budget, init_points, seeds_file, pruned_file, history_file, resume);
    }
    if (simulate->parsed()) return cmd_simulate(ctx, config_file);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    if (report->parsed() && e.code() != ErrorCode::io_error) return kExitData;
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitUsage;
}

}  // namespace knobforge
