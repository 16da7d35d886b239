// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

// Data-driven knob importance (sampled Shapley values over a forest
// surrogate) and comparison of knob selections.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "knobforge/knobspace.hpp"
#include "knobforge/target.hpp"

namespace knobforge {

struct CollectedObservations {
  std::vector<Observation> observations;  // successes only
  std::size_t failures = 0;
};

// Evaluates an LHS sample of size n. Throws Error{insufficient_data} when
// fewer than two evaluations succeed.
CollectedObservations collect_observations(Target& target, const ConfigurationSpace& space, std::size_t n,
                                           std::uint64_t seed);

enum class RankingMethod { shapley_surrogate, llm, reference };

std::string_view to_string(RankingMethod method);
RankingMethod ranking_method_from_string(std::string_view text);

struct ImportanceRanking {
  std::string label;
  RankingMethod method = RankingMethod::shapley_surrogate;
  std::vector<std::pair<std::string, double>> entries;  // importance descending

  std::vector<std::string> top(std::size_t k) const;
};

// Ranking from an ordered name list (e.g. an LLM or expert selection); the
// importance is the reversed rank.
ImportanceRanking ranking_from_names(std::string label, RankingMethod method, const std::vector<std::string>& names);

nlohmann::json ranking_to_json(const ImportanceRanking& ranking);
ImportanceRanking ranking_from_json(const nlohmann::json& doc);

// Importance of knob i is the mean over sampled permutations of
// |f(S + i) - f(S)|, where f is a forest fit to the observations, knobs in the
// coalition take the values of a randomly drawn observation and absent knobs
// sit at their defaults. Requires at least 2 * dimension observations.
ImportanceRanking shapley_importance(const std::vector<Observation>& observations, const ConfigurationSpace& space,
                                     int permutations_count, std::uint64_t seed);

struct PruningComparison {
  std::string label;
  std::vector<std::string> top_k;
  std::size_t overlap = 0;
  std::vector<std::string> only_in_ranking;    // in this top-k, not the reference's
  std::vector<std::string> only_in_reference;  // in the reference top-k, not this one
};

struct PruningReport {
  std::size_t k = 0;
  std::string reference_label;
  std::vector<std::string> reference_top_k;
  std::vector<PruningComparison> rows;
};

// Throws Error{invalid_k} when k is 0 or exceeds any ranking's length.
PruningReport pruning_report(const std::vector<ImportanceRanking>& rankings, const ImportanceRanking& reference,
                             std::size_t k);

nlohmann::json pruning_report_to_json(const PruningReport& report);
std::string pruning_report_to_text(const PruningReport& report);

// Keeps the top-k knobs; numeric ranges are the [10th, 90th] percentile of
// their values among the top-decile observations (parent range if that
// collapses), enumeration choices are the values seen there.
PrunedSpace data_driven_pruned_space(const ConfigurationSpace& space, const ImportanceRanking& ranking,
                                     const std::vector<Observation>& observations, std::size_t k,
                                     ObjectiveKind kind);

}  // namespace knobforge
