// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "../unit/fixtures.hpp"
#include "knobforge/advisor.hpp"
#include "knobforge/cli.hpp"
#include "knobforge/error.hpp"
#include "knobforge/gp.hpp"
#include "knobforge/metrics.hpp"
#include "knobforge/optimize.hpp"
#include "knobforge/pruning.hpp"
#include "knobforge/sampling.hpp"

using namespace knobforge;
using namespace knobforge::testing;
namespace fs = std::filesystem;

namespace {

struct Check {
  bool ok = true;
  std::vector<std::string> failures;

  void expect(bool cond, std::string what) {
    if (!cond) {
      ok = false;
      failures.push_back(std::move(what));
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. Metric formulas against the published comparison table.

struct TableRow {
  const char* label;
  double odp;
  int tes;
  double printed_pe;       // percent
  double printed_speedup;  // percent
  bool ddpg_base;
  bool pe_derivable;
  bool speedup_derivable;
};

void metric_fidelity(Check& c) {
  const double vbo_odp = 154.73, ddpg_odp = 120.71;
  const int vbo_tes = 316, ddpg_tes = 99;
  const std::vector<TableRow> rows = {
      {"VBO + Mapping", 154.37, 279, -0.23, 11.71, false, true, true},
      {"RGPE + Model Ensemble", 158.02, 215, 0.42, 42.67, false, false, false},
      {"DS-DDPG + Pre-training", 162.15, 313, 33.10, -216.16, true, false, true},
      {"VBO + GPT-3.5", 127.68, 176, -17.48, 44.30, false, true, true},
      {"VBO + GPT-4-Turbo", 152.01, 84, -1.93, 73.41, false, false, true},
      {"VBO + GPT-4o", 126.65, 90, -18.29, 71.51, false, false, true},
      {"VBO + Claude-3-Opus", 126.09, 2, -18.65, 99.37, false, false, true},
      {"VBO + Llama3-8B-Instruct", 153.16, 90, -1.19, 71.51, false, false, true},
      {"VBO + Llama3-70B-Instruct", 154.68, 90, -0.03, 71.51, false, true, true},
      {"VBO + Qwen2-7B", 153.58, 100, -0.74, 68.35, false, true, true},
  };
  int reproduced = 0, inconsistent = 0;
  auto compare = [&](const TableRow& r, const char* metric, double computed, double printed, bool derivable) {
    const double diff = std::abs(computed - printed);
    std::cout << fmt::format("    {:<26} {:<7} computed {:>8.2f}%  printed {:>8.2f}%  {}\n", r.label, metric,
                             computed, printed, derivable ? "" : "(not derivable from the table columns)");
    if (derivable) {
      c.expect(diff <= 0.02 + 1e-9, fmt::format("{} {}: {:.4f} vs {:.2f}", r.label, metric, computed, printed));
      ++reproduced;
    } else {
      c.expect(diff > 0.02, fmt::format("{} {} unexpectedly reproduces", r.label, metric));
      ++inconsistent;
    }
  };
  for (const auto& r : rows) {
    const double base_odp = r.ddpg_base ? ddpg_odp : vbo_odp;
    const int base_tes = r.ddpg_base ? ddpg_tes : vbo_tes;
    compare(r, "PE", 100.0 * compute_pe(base_odp, r.odp), r.printed_pe, r.pe_derivable);
    compare(r, "Speedup", 100.0 * compute_speedup(base_tes, r.tes), r.printed_speedup, r.speedup_derivable);
  }
  // The worked examples.
  c.expect(std::round(compute_speedup(316, 279) * 1e4) == 1171.0, "(316,279)");
  c.expect(std::abs(100.0 * compute_speedup(316, 84) - 73.41) <= 0.02, "(316,84)");
  c.expect(std::round(compute_speedup(316, 2) * 1e4) == 9937.0, "(316,2)");
  c.expect(std::round(compute_pe(154.73, 154.37) * 1e4) == -23.0, "(154.73,154.37)");
  c.expect(std::round(compute_speedup(99, 313) * 1e4) == -21616.0, "(99,313)");
  std::cout << fmt::format("    {} values reproduced, {} confirmed inconsistent with the table columns\n", reproduced,
                           inconsistent);
}

// ---------------------------------------------------------------------------
// 2. VBO and SMAC reach the planted optimum.

void optimizer_convergence(Check& c) {
  const auto space = grid_space(10);
  int vbo_ok = 0, smac_ok = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Simulator a(space, planted_surface()), b(space, planted_surface());
    TunerBudget bv;
    bv.max_iterations = 60;
    bv.rng_seed = seed;
    TunerBudget bs = bv;
    bs.max_iterations = 80;
    const double rv = compute_odp(vbo_run(a, space, bv)) / a.oracle_objective();
    const double rs = compute_odp(smac_run(b, space, bs)) / b.oracle_objective();
    vbo_ok += rv >= 0.95;
    smac_ok += rs >= 0.95;
    std::cout << fmt::format("    seed {}: VBO {:.4f}  SMAC {:.4f} of oracle\n", seed, rv, rs);
  }
  std::cout << fmt::format("    VBO {}/10, SMAC {}/10 within 5%\n", vbo_ok, smac_ok);
  c.expect(vbo_ok >= 9, "VBO");
  c.expect(smac_ok >= 9, "SMAC");
}

// ---------------------------------------------------------------------------
// 3. Seeding VBO with sampled configurations.

void initialization_speedup(Check& c) {
  const auto space = grid_space(10);
  const auto spec = planted_surface();
  double speedup_sum = 0.0, pe_sum = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Simulator probe(space, spec);
    MockOptions o;
    o.policy = MockPolicy::hill_climb;
    o.hints = hints_from_surface(spec);
    o.seed = seed;
    MockLlm mock(space, o);
    const auto fb = *probe.evaluate(space.defaults()).feedback;
    const auto init = llm_sample_initial_configs(mock, space, EnvironmentInfo{}, fb, 10, 30);
    c.expect(init.configs.size() == 10, fmt::format("seed {}: {} seeds", seed, init.configs.size()));

    Simulator a(space, spec), b(space, spec);
    TunerBudget budget;
    budget.max_iterations = 60;
    budget.rng_seed = seed;
    const auto base = vbo_run(a, space, budget);
    const auto seeded = vbo_run(b, space, budget, init.configs);
    const int t0 = compute_tes(base), t1 = compute_tes(seeded);
    const double sp = compute_speedup(t0, t1);
    const double pe = compute_pe(compute_odp(base), compute_odp(seeded));
    double best_seed = 0.0;
    for (int i = 1; i <= static_cast<int>(init.configs.size()); ++i) {
      best_seed = std::max(best_seed, seeded.observations[i].feedback->objective);
    }
    speedup_sum += sp;
    pe_sum += pe;
    std::cout << fmt::format(
        "    seed {}: TES {} -> {}  ODP {:.2f} -> {:.2f}  best seed {:.4f} of oracle  Speedup {:.2f}%  PE {:.2f}%\n",
        seed, t0, t1, compute_odp(base), compute_odp(seeded), best_seed / a.oracle_objective(), 100.0 * sp,
        100.0 * pe);
  }
  const double mean_sp = speedup_sum / 5.0, mean_pe = pe_sum / 5.0;
  std::cout << fmt::format("    mean Speedup {:.2f}%  mean PE {:.2f}%\n", 100.0 * mean_sp, 100.0 * mean_pe);
  c.expect(mean_sp >= 0.5, fmt::format("mean Speedup {:.4f} < 0.5", mean_sp));
  c.expect(std::abs(mean_pe) <= 0.05, fmt::format("mean |PE| {:.4f} > 0.05", std::abs(mean_pe)));
}

// ---------------------------------------------------------------------------
// 4. The LLM loop.

void llm_loop(Check& c) {
  const auto space = grid_space(10);
  const auto spec = planted_surface();
  Simulator sim(space, spec);
  MockOptions o;
  o.policy = MockPolicy::hill_climb;
  o.hints = hints_from_surface(spec);
  MockLlm mock(space, o);
  const auto h = llm_tuning_run(sim, space, EnvironmentInfo{}, mock, 30);
  const double ratio = compute_odp(h) / sim.oracle_objective();
  const int tes = compute_tes(h);
  const auto best = best_so_far(h);
  std::cout << fmt::format("    ODP {:.4f} of oracle, TES {}, {} evaluations\n", ratio, tes, h.observations.size());
  c.expect(ratio >= 0.98, "within 2%");
  c.expect(tes <= 15, "TES");
  c.expect(h.observations.size() <= 31, "round cap");
  c.expect(std::is_sorted(best.begin(), best.end()), "best-so-far monotone");
}

// ---------------------------------------------------------------------------
// 5. Pruning.

void pruning_recovery(Check& c) {
  const auto space = grid_space(20);
  const auto spec = planted_surface();
  const std::set<std::string> planted = {"k00", "k03", "k07"};

  // Share of objective variance carried by the planted knobs.
  {
    Simulator sim(space, spec);
    double n = 0, mean = 0, m2 = 0, pn = 0, pmean = 0, pm2 = 0;
    for (const auto& cfg : lhs_sample(space, 2000, 99)) {
      const double y = sim.evaluate(cfg).feedback->objective;
      n += 1;
      const double d = y - mean;
      mean += d / n;
      m2 += d * (y - mean);
      Configuration only = space.defaults();
      for (const auto& k : planted) only.set(k, cfg.number(k));
      const double yp = sim.evaluate(only).feedback->objective;
      pn += 1;
      const double dp = yp - pmean;
      pmean += dp / pn;
      pm2 += dp * (yp - pmean);
    }
    const double share = pm2 / m2;
    std::cout << fmt::format("    planted knobs carry {:.1f}% of the objective variance\n", 100.0 * share);
    c.expect(share >= 0.9, "variance share");
  }

  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Simulator sim(space, spec);
    const auto obs = collect_observations(sim, space, 200, seed).observations;
    const auto top = shapley_importance(obs, space, 200, seed).top(3);
    const bool hit = std::set<std::string>(top.begin(), top.end()) == planted;
    hits += hit;
    std::cout << fmt::format("    seed {}: top-3 {} {} {}{}\n", seed, top[0], top[1], top[2], hit ? "" : "  (miss)");
  }
  std::cout << fmt::format("    planted set recovered in {}/10 seeds\n", hits);
  c.expect(hits >= 9, "planted top-3");

  const auto ref = ranking_from_names("expert", RankingMethod::reference, expert_selection());
  const auto gpt = ranking_from_names("GPT-4o", RankingMethod::llm, gpt4o_selection());
  const auto report = pruning_report({gpt}, ref, 10);
  const auto& row = report.rows.at(0);
  std::cout << pruning_report_to_text(report);
  c.expect(row.overlap == 7, "overlap 7");
  c.expect(std::set<std::string>(row.only_in_ranking.begin(), row.only_in_ranking.end()) ==
               std::set<std::string>{"innodb_io_capacity", "join_buffer_size", "thread_cache_size"},
           "ranking-only knobs");
  c.expect(std::set<std::string>(row.only_in_reference.begin(), row.only_in_reference.end()) ==
               std::set<std::string>{"sort_buffer_size", "max_connections", "key_buffer_size"},
           "reference-only knobs");
}

// ---------------------------------------------------------------------------
// 6. Reply parsing.

void parser_robustness(Check& c) {
  const auto space = mixed_space();
  const auto rounded = parse_config_response(space, R"({"buffer_pool": 7.5})");
  c.expect(rounded.config.number("buffer_pool") == 8.0, "7.5 -> 8");
  c.expect(rounded.log.size() == 1 && rounded.log[0].knob == "buffer_pool", "rounding logged");
  if (!rounded.log.empty()) std::cout << fmt::format("    logged: {}: {}\n", rounded.log[0].knob, rounded.log[0].detail);

  const auto clamped = parse_config_response(space, R"({"buffer_pool": -5})");
  c.expect(clamped.config.number("buffer_pool") == 0.0, "-5 -> 0");
  c.expect(clamped.log.size() == 1, "clamp logged");
  if (!clamped.log.empty()) std::cout << fmt::format("    logged: {}: {}\n", clamped.log[0].knob, clamped.log[0].detail);

  bool parse_failure = false;
  try {
    parse_config_response(space, "Raise the buffer pool a little.");
  } catch (const Error& e) {
    parse_failure = e.code() == ErrorCode::parse_failure;
  }
  c.expect(parse_failure, "no JSON -> parse_failure");

  // A reply without JSON is retried and the second reply is used.
  const auto grid = grid_space(3);
  MockOptions o;
  o.policy = MockPolicy::scripted;
  o.replies = {"I suggest raising k00.", R"({"k00": 9})"};
  MockLlm scripted(grid, o);
  Feedback fb;
  fb.objective = 1.0;
  const auto step = llm_refine_step(scripted, grid, EnvironmentInfo{}, grid.defaults(), fb);
  c.expect(scripted.calls() == 2 && step.config.number("k00") == 9.0, "retry after parse_failure");
  std::cout << fmt::format("    retry: {} calls, k00 = {}\n", scripted.calls(), step.config.number("k00"));

  // Five consecutive refinement failures end the loop after the default.
  const auto gspace = grid_space(10);
  Simulator sim(gspace, planted_surface());
  MockOptions m;
  m.policy = MockPolicy::malformed;
  MockLlm malformed(gspace, m);
  AdvisorOptions opts;
  opts.retries = 1;
  bool clean = true;
  RunHistory h;
  try {
    h = llm_tuning_run(sim, gspace, EnvironmentInfo{}, malformed, 30, opts);
  } catch (const std::exception&) {
    clean = false;
  }
  c.expect(clean, "loop ends without throwing");
  c.expect(h.observations.size() == 1, "only the default evaluated");
  c.expect(malformed.calls() == static_cast<std::size_t>(kMaxConsecutiveRefineFailures * 2), "five failed steps");
  std::cout << fmt::format("    malformed model: {} calls, {} observation(s)\n", malformed.calls(),
                           h.observations.size());
}

// ---------------------------------------------------------------------------
// 7. CLI determinism and report round trip.

int cli(std::vector<std::string> args, std::string* out_text = nullptr) {
  args.insert(args.begin(), "knobforge");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

void determinism(Check& c) {
  TempDir dir;
  dir.write("catalog.json", space_to_json(grid_space(20)).dump(2));
  dir.write("surface.json", surface_to_json(planted_surface()).dump(2));
  nlohmann::json llm;
  llm["mock"]["policy"] = "hill_climb";
  llm["mock"]["hints"] = "surface";
  nlohmann::json doc;
  doc["catalog"] = "catalog.json";
  doc["target"]["simulator"] = "surface.json";
  doc["llm"] = llm;
  doc["budgets"]["tune"]["max_iterations"] = 40;
  doc["budgets"]["tune"]["init_points"] = 10;
  doc["output_dir"] = "out";
  doc["seed"] = 7;
  const auto session = dir.write("session.json", doc.dump(2)).string();

  for (const std::string method : {"vbo", "smac", "llm"}) {
    const auto a = dir.path() / (method + "_a.jsonl");
    const auto b = dir.path() / (method + "_b.jsonl");
    const int ca = cli({"--session", session, "--quiet", "tune", "--method", method, "--history", a.string()});
    const int cb = cli({"--session", session, "--quiet", "tune", "--method", method, "--history", b.string()});
    c.expect(ca == kExitOk && cb == kExitOk, method + " exit codes");
    const auto ta = slurp(a), tb = slurp(b);
    const bool same = !ta.empty() && ta == tb;
    c.expect(same, method + " histories differ");
    std::cout << fmt::format("    {}: {} bytes, identical: {}\n", method, ta.size(), same ? "yes" : "no");

    std::string text;
    const auto json_path = dir.path() / (method + "_report.json");
    c.expect(cli({"report", a.string(), "--json", json_path.string()}, &text) == kExitOk, method + " report");
    const auto h = load_history(a);
    const auto report = nlohmann::json::parse(slurp(json_path));
    const auto& row = report.at("rows").at(0);
    c.expect(row.at("odp").get<double>() == compute_odp(h), method + " report ODP");
    c.expect(row.at("tes").get<int>() == compute_tes(h), method + " report TES");
    c.expect(row.at("ir").get<double>() == compute_ir(h), method + " report IR");
  }
}

// ---------------------------------------------------------------------------
// 8. GP gradient, EI and LHS.

void numerical_soundness(Check& c) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 1 + trial % 4;
    Eigen::MatrixXd x(3, dim);
    Eigen::VectorXd y(3);
    for (int i = 0; i < 3; ++i) {
      for (int d = 0; d < dim; ++d) x(i, d) = u(rng);
      y[i] = z(rng);
    }
    GpHyper hyper;
    hyper.log_lengthscales.resize(dim);
    for (int d = 0; d < dim; ++d) hyper.log_lengthscales[d] = std::log(0.1 + u(rng));
    hyper.log_signal_variance = std::log(0.2 + 2.0 * u(rng));
    hyper.log_noise_variance = std::log(1e-3 + 0.2 * u(rng));
    Eigen::VectorXd grad;
    gp_log_marginal_likelihood(x, y, hyper, &grad);
    const Eigen::VectorXd theta = hyper.pack();
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      const double h = 1e-5;
      Eigen::VectorXd plus = theta, minus = theta;
      plus[j] += h;
      minus[j] -= h;
      const double fd = (gp_log_marginal_likelihood(x, y, GpHyper::unpack(plus, dim)) -
                         gp_log_marginal_likelihood(x, y, GpHyper::unpack(minus, dim))) /
                        (2 * h);
      worst = std::max(worst, std::abs(fd - grad[j]) / std::max(1.0, std::abs(fd)));
    }
  }
  std::cout << fmt::format("    worst LML gradient relative error {:.2e}\n", worst);
  c.expect(worst < 1e-4, "LML gradient");

  const double ei0 = expected_improvement(5.0, 0.0, 5.0, true);
  const double ei1 = expected_improvement(5.0, 1.0, 5.0, true);
  std::cout << fmt::format("    EI(var 0) = {}, EI(sd 1) = {:.12f}\n", ei0, ei1);
  c.expect(ei0 == 0.0, "EI at zero variance");
  c.expect(std::abs(ei1 - 1.0 / std::sqrt(2.0 * std::numbers::pi)) <= 1e-9, "EI at unit sd");

  for (std::size_t n : {std::size_t{4}, std::size_t{100}, std::size_t{6000}}) {
    const std::size_t dim = 5;
    const auto pts = lhs_points(dim, n, rng);
    bool ok = pts.size() == n;
    for (std::size_t d = 0; d < dim && ok; ++d) {
      std::vector<char> hit(n, 0);
      for (const auto& p : pts) {
        const auto s = static_cast<std::size_t>(std::floor(p[d] * static_cast<double>(n)));
        if (s >= n || hit[s]) {
          ok = false;
          break;
        }
        hit[s] = 1;
      }
    }
    c.expect(ok, fmt::format("LHS n={}", n));
    std::cout << fmt::format("    LHS n={}: {}\n", n, ok ? "one point per stratum in every dimension" : "broken");
  }
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;
    std::function<void(Check&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "metric-formula fidelity", 1.0, metric_fidelity},
      {2, "optimizer oracle convergence", 120.0, optimizer_convergence},
      {3, "initialization speedup", 180.0, initialization_speedup},
      {4, "LLM-loop efficiency", 30.0, llm_loop},
      {5, "pruning recovery", 60.0, pruning_recovery},
      {6, "parser robustness", 1.0, parser_robustness},
      {7, "determinism and persistence", 30.0, determinism},
      {8, "numerical soundness", 60.0, numerical_soundness},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    std::cout << fmt::format("criterion {}: {}\n", cr.id, cr.name);
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(c);
    } catch (const std::exception& e) {
      c.expect(false, fmt::format("exception: {}", e.what()));
    }
    const double secs = seconds_since(t0);
    c.expect(secs < cr.limit_seconds, fmt::format("took {:.1f}s, limit {:.0f}s", secs, cr.limit_seconds));
    for (const auto& f : c.failures) std::cout << "    failed: " << f << "\n";
    std::cout << fmt::format("{} criterion {} ({}) {:.2f}s\n", c.ok ? "PASS" : "FAIL", cr.id, cr.name, secs);
    failed += c.ok ? 0 : 1;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
