// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "knobforge/cli.hpp"
#include "knobforge/metrics.hpp"
#include "knobforge/pruning.hpp"

using namespace knobforge;
using namespace knobforge::testing;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "knobforge");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  CliResult r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

// A session over a 20-knob grid simulator with three planted knobs and the
// hill-climbing mock.
struct SessionFixture {
  TempDir dir;
  fs::path session;

  explicit SessionFixture(nlohmann::json llm = {{"mock", {{"policy", "hill_climb"}, {"hints", "surface"}}}}) {
    dir.write("catalog.json", space_to_json(grid_space(20)).dump(2));
    dir.write("surface.json", surface_to_json(planted_surface()).dump(2));
    nlohmann::json doc = {{"catalog", "catalog.json"},
                          {"target", {{"simulator", "surface.json"}}},
                          {"llm", llm},
                          {"budgets",
                           {{"tune", {{"max_iterations", 40}, {"init_points", 10}}},
                            {"llm_rounds", 30},
                            {"prune_samples", 200},
                            {"shapley_permutations", 200}}},
                          {"output_dir", "out"},
                          {"seed", 3}};
    session = dir.write("grid.json", doc.dump(2));
  }

  fs::path out() const { return dir.path() / "out"; }
};

RunHistory synthetic(const std::string& label, int peak_at, double peak, int length) {
  RunHistory h;
  h.session_id = "s";
  h.method_label = label;
  h.space_digest = "d";
  for (int i = 0; i <= length; ++i) {
    Observation o;
    o.iteration = i;
    o.config.set("k00", static_cast<double>(i));
    Feedback fb;
    fb.objective = i == peak_at ? peak : 100.0 + i * 1e-3 * (i < peak_at ? 1 : 0);
    o.feedback = fb;
    h.observations.push_back(o);
  }
  return h;
}

}  // namespace

TEST_CASE("cli: usage errors exit 64") {
  SessionFixture f;
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"--session", f.session.string(), "prune", "--k", "0"}).code == kExitUsage);
  CHECK(run({"--session", f.session.string(), "prune", "--k", "21"}).code == kExitUsage);
  CHECK(run({"--session", f.session.string(), "tune", "--method", "nope"}).code == kExitUsage);
}

TEST_CASE("cli: missing or broken session exits 1") {
  TempDir dir;
  CHECK(run({"--session", (dir.path() / "missing.json").string(), "simulate"}).code == kExitConfig);
  const auto bad = dir.write("bad.json", "{\"catalog\": 5}");
  CHECK(run({"--session", bad.string(), "simulate"}).code == kExitConfig);
}

TEST_CASE("cli: shapley pruning with k 3 selects the planted knobs") {
  SessionFixture f;
  const auto r = run({"--session", f.session.string(), "--quiet", "prune", "--method", "shapley", "--k", "3"});
  REQUIRE(r.code == kExitOk);
  const auto doc = nlohmann::json::parse(read_file(f.out() / "pruned_shapley.json"));
  const auto pruned = pruned_from_json(grid_space(20), doc);
  CHECK(std::set<std::string>(pruned.selected.begin(), pruned.selected.end()) ==
        std::set<std::string>{"k00", "k03", "k07"});
  CHECK(fs::exists(f.out() / "ranking_shapley.json"));
}

TEST_CASE("cli: llm pruning with a reference writes a comparison report") {
  SessionFixture f;
  const auto ref = ranking_from_names("planted", RankingMethod::reference, {"k00", "k03", "k07"});
  const auto ref_path = f.dir.write("reference.json", ranking_to_json(ref).dump());
  const auto r = run({"--session", f.session.string(), "--quiet", "prune", "--method", "llm", "--k", "3",
                      "--reference", ref_path.string()});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("3/3") != std::string::npos);
  CHECK(fs::exists(f.out() / "pruning_report_llm.json"));
  CHECK(fs::exists(f.out() / "pruning_report_llm.txt"));
}

TEST_CASE("cli: init writes seeds and warns when sampling is exhausted") {
  SessionFixture f;
  auto r = run({"--session", f.session.string(), "--quiet", "init", "--u", "1", "--then", "none"});
  REQUIRE(r.code == kExitOk);
  auto seeds = nlohmann::json::parse(read_file(f.out() / "seeds.json"));
  CHECK(seeds.at("configs").size() == 1);
  CHECK(seeds.at("exhausted") == false);

  nlohmann::json llm;
  llm["mock"]["policy"] = "scripted";
  llm["mock"]["replies"] = std::vector<std::string>(10, R"({"k00": 9})");
  SessionFixture dup(llm);
  r = run({"--session", dup.session.string(), "--quiet", "init", "--u", "5", "--then", "none", "--max-attempts",
           "6"});
  CHECK(r.code == kExitOk);
  CHECK(r.err.find("warning") != std::string::npos);
  seeds = nlohmann::json::parse(read_file(dup.out() / "seeds.json"));
  CHECK(seeds.at("exhausted") == true);
  CHECK(seeds.at("configs").size() == 1);
}

TEST_CASE("cli: init then vbo runs a seeded optimizer") {
  SessionFixture f;
  const auto r = run({"--session", f.session.string(), "--quiet", "init", "--u", "5", "--then", "vbo"});
  REQUIRE(r.code == kExitOk);
  const auto h = load_history(f.out() / "init_vbo.jsonl");
  CHECK(h.method_label == "VBO+LLM-init");
  CHECK(h.observations.size() == 41);
}

TEST_CASE("cli: llm tuning reaches TES <= 15") {
  SessionFixture f;
  const auto r = run({"--session", f.session.string(), "--quiet", "tune", "--method", "llm", "--budget", "30"});
  REQUIRE(r.code == kExitOk);
  const auto h = load_history(f.out() / "tune_llm.jsonl");
  CHECK(compute_tes(h) <= 15);
  const auto report = nlohmann::json::parse(read_file(f.out() / "tune_llm_report.json"));
  const auto& row = report.at("rows").at(0);
  CHECK(row.at("ir").is_number());
  CHECK(row.at("odp").is_number());
  CHECK(row.at("tes").is_number());
}

TEST_CASE("cli: vbo seeded with the optimum has TES 1") {
  SessionFixture f;
  const auto space = grid_space(20);
  Simulator sim(space, planted_surface());
  nlohmann::json seeds = {{"configs", {to_json(space, sim.oracle_configuration())}}};
  const auto seeds_path = f.dir.write("seeds.json", seeds.dump());
  const auto r = run({"--session", f.session.string(), "--quiet", "tune", "--method", "vbo", "--budget", "15",
                      "--seeds", seeds_path.string()});
  REQUIRE(r.code == kExitOk);
  const auto h = load_history(f.out() / "tune_vbo.jsonl");
  CHECK(h.method_label == "VBO+seeded");
  CHECK(compute_tes(h) == 1);
}

TEST_CASE("cli: tuning on a pruned space") {
  SessionFixture f;
  REQUIRE(run({"--session", f.session.string(), "--quiet", "prune", "--method", "shapley", "--k", "3"}).code == 0);
  const auto r = run({"--session", f.session.string(), "--quiet", "tune", "--method", "smac", "--budget", "20",
                      "--pruned", (f.out() / "pruned_shapley.json").string()});
  REQUIRE(r.code == kExitOk);
  const auto h = load_history(f.out() / "tune_smac.jsonl");
  CHECK(h.method_label == "SMAC+pruned");
  CHECK(h.observations.front().config.size() == 3);
}

TEST_CASE("cli: identical tune invocations write byte-identical histories") {
  SessionFixture f;
  for (const std::string method : {"vbo", "llm"}) {
    const auto a = f.dir.path() / ("a_" + method + ".jsonl");
    const auto b = f.dir.path() / ("b_" + method + ".jsonl");
    REQUIRE(run({"--session", f.session.string(), "--quiet", "tune", "--method", method, "--budget", "15",
                 "--history", a.string()})
                .code == 0);
    REQUIRE(run({"--session", f.session.string(), "--quiet", "tune", "--method", method, "--budget", "15",
                 "--history", b.string()})
                .code == 0);
    CHECK(read_file(a) == read_file(b));
    CHECK_FALSE(read_file(a).empty());
  }
}

TEST_CASE("cli: resume continues a truncated history") {
  SessionFixture f;
  const auto full = f.dir.path() / "full.jsonl";
  const auto part = f.dir.path() / "part.jsonl";
  REQUIRE(run({"--session", f.session.string(), "--quiet", "tune", "--method", "vbo", "--budget", "15",
               "--history", full.string()})
              .code == 0);
  // Keep the header and the first eight observations.
  std::istringstream in(read_file(full));
  std::ofstream cut(part);
  std::string line;
  for (int i = 0; i < 9 && std::getline(in, line); ++i) cut << line << '\n';
  cut.close();
  const auto r = run({"--session", f.session.string(), "tune", "--method", "vbo", "--budget", "15", "--history",
                      part.string(), "--resume"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.err.find("resuming from 8") != std::string::npos);
  CHECK(read_file(part) == read_file(full));
}

TEST_CASE("cli: report pairs histories against a base") {
  TempDir dir;
  save_history(dir.path() / "base.jsonl", synthetic("VBO", 316, 154.73, 400));
  save_history(dir.path() / "mapped.jsonl", synthetic("VBO+Mapping", 279, 154.37, 400));
  const auto r = run({"report", (dir.path() / "mapped.jsonl").string(), "--base", (dir.path() / "base.jsonl").string(),
                      "--json", (dir.path() / "report.json").string()});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("11.71%") != std::string::npos);
  CHECK(r.out.find("-0.23%") != std::string::npos);
  CHECK(fs::exists(dir.path() / "report.json"));

  const auto single = run({"report", (dir.path() / "base.jsonl").string()});
  CHECK(single.code == kExitOk);
  CHECK(single.out.find("Speedup") == std::string::npos);
}

TEST_CASE("cli: report rejects mixed kinds and names corrupt lines") {
  TempDir dir;
  auto lat = synthetic("L", 3, 50.0, 5);
  lat.objective_kind = ObjectiveKind::latency_seconds;
  for (auto& o : lat.observations) o.feedback->kind = ObjectiveKind::latency_seconds;
  save_history(dir.path() / "tps.jsonl", synthetic("T", 3, 50.0, 5));
  save_history(dir.path() / "lat.jsonl", lat);
  CHECK(run({"report", (dir.path() / "tps.jsonl").string(), (dir.path() / "lat.jsonl").string()}).code == kExitData);

  std::string text = read_file(dir.path() / "tps.jsonl");
  text += "{oops\n";
  const auto bad = dir.write("bad.jsonl", text);
  const auto r = run({"report", bad.string()});
  CHECK(r.code == kExitData);
  CHECK(r.err.find("bad.jsonl:8") != std::string::npos);
}

TEST_CASE("cli: simulate prints the feedback") {
  SessionFixture f;
  const auto r = run({"--session", f.session.string(), "simulate"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("objective") != std::string::npos);
}
