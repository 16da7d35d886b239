// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "knobforge/error.hpp"
#include "knobforge/metrics.hpp"

using namespace knobforge;
using namespace knobforge::testing;

namespace {

Observation make_obs(int iteration, double objective, ObjectiveKind kind = ObjectiveKind::throughput_tps) {
  Observation o;
  o.iteration = iteration;
  o.config.set("buffer_pool", static_cast<double>(iteration));
  Feedback fb;
  fb.kind = kind;
  fb.objective = objective;
  fb.internal_metrics["lock_waits"] = iteration * 0.5;
  o.feedback = fb;
  o.timestamp = iteration * 60.0;
  return o;
}

Observation failed_obs(int iteration) {
  Observation o;
  o.iteration = iteration;
  o.config.set("buffer_pool", -1.0);
  o.status = EvalStatus::evaluation_failed;
  o.notes = {"benchmark crashed"};
  return o;
}

// Objectives listed in iteration order, starting at the default.
RunHistory history_of(const std::vector<double>& objectives, std::string label = "VBO",
                      ObjectiveKind kind = ObjectiveKind::throughput_tps) {
  RunHistory h;
  h.session_id = "s";
  h.method_label = std::move(label);
  h.space_digest = "d";
  h.objective_kind = kind;
  for (std::size_t i = 0; i < objectives.size(); ++i) {
    h.observations.push_back(make_obs(static_cast<int>(i), objectives[i], kind));
  }
  return h;
}

// History whose peak is first reached at iteration `peak_at` out of `length`.
RunHistory peak_history(int peak_at, int length, double peak) {
  std::vector<double> v(length + 1, peak * 0.5);
  for (int i = 1; i < peak_at; ++i) v[i] = peak * 0.5 + i * 1e-3;
  v[peak_at] = peak;
  return history_of(v);
}

}  // namespace

TEST_CASE("ODP examples") {
  CHECK(compute_odp(history_of({100.0, 120.0, 154.73, 140.0})) == 154.73);
  CHECK(compute_odp(history_of({99.5})) == 99.5);
  CHECK(compute_odp(history_of({2594.27, 853.11, 900.0}, "x", ObjectiveKind::latency_seconds)) == 853.11);
  CHECK_THROWS_AS(compute_odp(RunHistory{}), Error);
}

TEST_CASE("ODP includes the default and ignores failures") {
  auto h = history_of({200.0, 100.0});
  h.observations.push_back(failed_obs(2));
  CHECK(compute_odp(h) == 200.0);
  RunHistory only_failed;
  only_failed.observations.push_back(failed_obs(0));
  CHECK_THROWS_AS(compute_odp(only_failed), Error);
}

TEST_CASE("TES examples") {
  CHECK(compute_tes(peak_history(84, 100, 154.0)) == 84);
  CHECK(compute_tes(history_of({10.0, 50.0, 20.0, 50.0, 50.0})) == 1);
  std::vector<double> up(11);
  for (int i = 0; i <= 10; ++i) up[i] = 100.0 + i;
  CHECK(compute_tes(history_of(up)) == 10);
  CHECK_THROWS_AS(compute_tes(history_of({10.0})), Error);
}

TEST_CASE("TES: failed observations keep their indices") {
  auto h = history_of({10.0, 11.0});
  h.observations.push_back(failed_obs(2));
  h.observations.push_back(make_obs(3, 30.0));
  CHECK(compute_tes(h) == 3);
}

TEST_CASE("TES for latency histories is the first minimum") {
  CHECK(compute_tes(history_of({900.0, 850.0, 853.11, 700.0, 700.0}, "x", ObjectiveKind::latency_seconds)) == 3);
}

TEST_CASE("IR examples") {
  CHECK(compute_ir(history_of({120.0, 145.06, 150.0})) == 145.06);
  CHECK(compute_ir(history_of({120.0, 120.0, 120.0})) == 120.0);
  CHECK_THROWS_AS(compute_ir(history_of({120.0})), Error);
  try {
    compute_ir(history_of({120.0}));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::missing_first_refinement);
  }
}

TEST_CASE("property: IR <= ODP for throughput, IR >= ODP for latency") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(1.0, 1000.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(2 + trial % 30);
    for (auto& x : v) x = u(rng);
    CHECK(compute_ir(history_of(v)) <= compute_odp(history_of(v)));
    const auto lat = history_of(v, "x", ObjectiveKind::latency_seconds);
    CHECK(compute_ir(lat) >= compute_odp(lat));
  }
}

TEST_CASE("property: ODP invariant under appending worse observations") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(1.0, 100.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(5);
    for (auto& x : v) x = u(rng);
    v[0] = 0.5;  // keep the peak off the default so TES is pinned too
    auto h = history_of(v);
    const double odp = compute_odp(h);
    const int tes = compute_tes(h);
    for (int k = 0; k < 5; ++k) h.observations.push_back(make_obs(static_cast<int>(h.observations.size()), odp - u(rng)));
    CHECK(compute_odp(h) == odp);
    CHECK(compute_tes(h) == tes);
  }
}

TEST_CASE("PE examples") {
  CHECK(std::abs(compute_pe(154.73, 154.37) - (154.37 - 154.73) / 154.73) < 1e-15);
  CHECK(std::round(compute_pe(154.73, 154.37) * 10000.0) == -23.0);
  CHECK(compute_pe(42.0, 42.0) == 0.0);
  CHECK(std::round(compute_pe(120.71, 162.15) * 10000.0) == 3433.0);
  CHECK_THROWS_AS(compute_pe(0.0, 1.0), Error);
  CHECK_THROWS_AS(compute_pe(-1.0, 1.0), Error);
}

TEST_CASE("PE for latency is positive when latency drops") {
  CHECK(compute_pe(100.0, 80.0, ObjectiveKind::latency_seconds) == doctest::Approx(0.2));
  CHECK(compute_pe(100.0, 120.0, ObjectiveKind::latency_seconds) == doctest::Approx(-0.2));
}

TEST_CASE("Speedup examples") {
  CHECK(std::round(compute_speedup(316, 279) * 10000.0) == 1171.0);
  CHECK(std::round(compute_speedup(316, 2) * 10000.0) == 9937.0);
  CHECK(std::round(compute_speedup(99, 313) * 10000.0) == -21616.0);
  CHECK(compute_speedup(5, 5) == 0.0);
  CHECK_THROWS_AS(compute_speedup(0, 1), Error);
}

TEST_CASE("best-so-far is monotone") {
  const auto h = history_of({5.0, 3.0, 7.0, 6.0, 9.0});
  const auto b = best_so_far(h);
  CHECK(b == std::vector<double>{5.0, 5.0, 7.0, 7.0, 9.0});
  const auto lat = best_so_far(history_of({5.0, 3.0, 7.0, 2.0}, "x", ObjectiveKind::latency_seconds));
  CHECK(lat == std::vector<double>{5.0, 3.0, 3.0, 2.0});
}

TEST_CASE("comparison report with a base fills PE and Speedup") {
  const auto base = peak_history(316, 400, 154.73);
  auto seeded = peak_history(279, 400, 154.37);
  seeded.method_label = "VBO+Mapping";
  const auto report = comparison_report({base, seeded}, 0);
  REQUIRE(report.rows.size() == 2);
  CHECK(report.has_base);
  CHECK(report.rows[1].tes == 279);
  REQUIRE(report.rows[1].pe.has_value());
  REQUIRE(report.rows[1].speedup.has_value());
  CHECK(std::round(*report.rows[1].pe * 10000.0) == -23.0);
  CHECK(std::round(*report.rows[1].speedup * 10000.0) == 1171.0);
  const auto text = report_to_text(report);
  CHECK(text.find("11.71%") != std::string::npos);
  CHECK(text.find("VBO+Mapping") != std::string::npos);
  const auto doc = report_to_json(report);
  CHECK(doc.dump().find("speedup") != std::string::npos);
}

TEST_CASE("comparison report without a base omits PE and Speedup") {
  const auto report = comparison_report({history_of({1.0, 2.0})});
  CHECK_FALSE(report.has_base);
  CHECK_FALSE(report.rows[0].pe.has_value());
  CHECK_FALSE(report.rows[0].speedup.has_value());
  CHECK(report_to_text(report).find("Speedup") == std::string::npos);
}

TEST_CASE("latency reports label the ODP column ODP_AP") {
  const auto report = comparison_report({history_of({900.0, 853.11}, "x", ObjectiveKind::latency_seconds)});
  CHECK(report_to_text(report).find("ODP_AP") != std::string::npos);
  CHECK(report_to_json(report).dump().find("ODP_AP") != std::string::npos);
}

TEST_CASE("comparison report rejects mixed objective kinds") {
  try {
    comparison_report({history_of({1.0, 2.0}), history_of({1.0, 2.0}, "x", ObjectiveKind::latency_seconds)});
    FAIL("expected mixed_objective_kinds");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::mixed_objective_kinds);
  }
}

TEST_CASE("JSONL round trip") {
  auto h = history_of({100.0, 120.5, 119.25});
  h.observations[1].notes = {"buffer_pool: 7.5 -> 8"};
  h.observations[2].config.set("flush_method", std::string("O_DIRECT"));
  h.observations[2].config.set("adaptive_hash", false);
  h.observations.push_back(failed_obs(3));
  std::stringstream buf;
  write_history(buf, h);
  const auto back = read_history(buf);
  CHECK(back.session_id == h.session_id);
  CHECK(back.method_label == h.method_label);
  CHECK(back.space_digest == h.space_digest);
  REQUIRE(back.observations.size() == h.observations.size());
  for (std::size_t i = 0; i < h.observations.size(); ++i) {
    const auto& a = h.observations[i];
    const auto& b = back.observations[i];
    CHECK(a.iteration == b.iteration);
    CHECK(a.config == b.config);
    CHECK(a.status == b.status);
    CHECK(a.notes == b.notes);
    CHECK(a.timestamp == b.timestamp);
    CHECK(a.feedback.has_value() == b.feedback.has_value());
    if (a.feedback) {
      CHECK(a.feedback->objective == b.feedback->objective);
      CHECK(a.feedback->internal_metrics == b.feedback->internal_metrics);
    }
  }
  std::stringstream again;
  write_history(again, back);
  std::stringstream first;
  write_history(first, h);
  CHECK(again.str() == first.str());
}

TEST_CASE("JSONL errors name the line number") {
  std::stringstream buf;
  write_history(buf, history_of({1.0, 2.0, 3.0}));
  std::string text = buf.str();
  // Corrupt the third line (second observation).
  std::size_t pos = 0;
  for (int i = 0; i < 2; ++i) pos = text.find('\n', pos) + 1;
  text.insert(pos, "{not json");
  std::istringstream in(text);
  try {
    read_history(in, "h.jsonl");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("h.jsonl:3") != std::string::npos);
  }
}

TEST_CASE("save and load through a file") {
  TempDir dir;
  const auto h = history_of({1.0, 4.0});
  save_history(dir.path() / "h.jsonl", h);
  CHECK(compute_odp(load_history(dir.path() / "h.jsonl")) == 4.0);
  CHECK_THROWS_AS(load_history(dir.path() / "missing.jsonl"), Error);
}
