// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

// Run histories and the tuning metrics computed from them.
//
// Iteration convention: the default configuration is iteration 0, the first
// suggested configuration is iteration 1. TES counts from 1. Failed
// observations keep their index but never contribute to IR/ODP/TES.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "knobforge/knobspace.hpp"
#include "knobforge/target.hpp"

namespace knobforge {

struct RunHistory {
  std::string session_id;
  std::string method_label;
  std::string space_digest;
  ObjectiveKind objective_kind = ObjectiveKind::throughput_tps;
  std::vector<Observation> observations;
};

double compute_odp(const RunHistory& history);
int compute_tes(const RunHistory& history);
double compute_ir(const RunHistory& history);

// Positive PE means the initialized run found a better optimum. For latency
// objectives the sign is flipped so that holds for both kinds.
double compute_pe(double odp_orig, double odp_init,
                  ObjectiveKind kind = ObjectiveKind::throughput_tps);
double compute_speedup(int tes_orig, int tes_init);

// Best objective seen up to and including each successful observation.
std::vector<double> best_so_far(const RunHistory& history);

struct MetricsReport {
  std::string method_label;
  ObjectiveKind objective_kind = ObjectiveKind::throughput_tps;
  std::optional<double> ir;
  double odp = 0.0;
  std::optional<int> tes;
  std::optional<double> pe;
  std::optional<double> speedup;
};

MetricsReport compute_report(const RunHistory& history);

struct ComparisonReport {
  ObjectiveKind objective_kind = ObjectiveKind::throughput_tps;
  std::vector<MetricsReport> rows;
  bool has_base = false;
};

// `base` indexes the history every other row is paired against for PE and
// Speedup; without it those columns are omitted. Mixed objective kinds are
// rejected.
ComparisonReport comparison_report(const std::vector<RunHistory>& histories,
                                   std::optional<std::size_t> base = std::nullopt);

nlohmann::json report_to_json(const ComparisonReport& report);
std::string report_to_text(const ComparisonReport& report);

// JSON Lines persistence: a header {session_id, method_label, space_digest}
// followed by one observation per line.
nlohmann::json history_header(const RunHistory& history);
nlohmann::json observation_to_json(const Observation& obs, ObjectiveKind kind);
Observation observation_from_json(const nlohmann::json& line);
nlohmann::json configuration_to_json(const Configuration& config);
Configuration configuration_from_json(const nlohmann::json& doc);

void write_history(std::ostream& out, const RunHistory& history);
void save_history(const std::filesystem::path& path, const RunHistory& history);
// Errors name the offending line number.
RunHistory read_history(std::istream& in, const std::string& source = "<stream>");
RunHistory load_history(const std::filesystem::path& path);

}  // namespace knobforge
