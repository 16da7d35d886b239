// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#include "knobforge/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "knobforge/error.hpp"
#include "knobforge/forest.hpp"
#include "knobforge/sampling.hpp"

namespace knobforge {

namespace {

double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::string choice_of(const Knob& knob, const KnobValue& value) {
  if (knob.type == KnobType::boolean) return std::get<bool>(value) ? "true" : "false";
  return std::get<std::string>(value);
}

}  // namespace

CollectedObservations collect_observations(Target& target, const ConfigurationSpace& space, std::size_t n,
                                           std::uint64_t seed) {
  if (n < 2) throw Error(ErrorCode::invalid_argument, "collect_observations needs n >= 2");
  CollectedObservations out;
  int iteration = 0;
  for (auto& config : lhs_sample(space, n, seed)) {
    EvalOutcome outcome = target.evaluate(config);
    if (!outcome.ok()) {
      ++out.failures;
      continue;
    }
    Observation obs;
    obs.iteration = iteration++;
    obs.config = std::move(config);
    obs.feedback = std::move(outcome.feedback);
    obs.timestamp = target.now();
    out.observations.push_back(std::move(obs));
  }
  if (out.observations.size() < 2) {
    throw Error(ErrorCode::insufficient_data,
                fmt::format("{} of {} evaluations succeeded, need at least 2", out.observations.size(), n));
  }
  return out;
}

std::string_view to_string(RankingMethod method) {
  switch (method) {
    case RankingMethod::shapley_surrogate: return "shapley_surrogate";
    case RankingMethod::llm: return "llm";
    case RankingMethod::reference: return "reference";
  }
  return "unknown";
}

RankingMethod ranking_method_from_string(std::string_view text) {
  if (text == "shapley_surrogate") return RankingMethod::shapley_surrogate;
  if (text == "llm") return RankingMethod::llm;
  if (text == "reference") return RankingMethod::reference;
  throw Error(ErrorCode::parse_failure, fmt::format("unknown ranking method '{}'", text));
}

std::vector<std::string> ImportanceRanking::top(std::size_t k) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, entries.size()); ++i) out.push_back(entries[i].first);
  return out;
}

ImportanceRanking ranking_from_names(std::string label, RankingMethod method, const std::vector<std::string>& names) {
  ImportanceRanking r;
  r.label = std::move(label);
  r.method = method;
  for (std::size_t i = 0; i < names.size(); ++i) {
    r.entries.emplace_back(names[i], static_cast<double>(names.size() - i));
  }
  return r;
}

nlohmann::json ranking_to_json(const ImportanceRanking& ranking) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [name, importance] : ranking.entries) {
    entries.push_back({{"knob", name}, {"importance", importance}});
  }
  return {{"label", ranking.label}, {"method", to_string(ranking.method)}, {"entries", entries}};
}

ImportanceRanking ranking_from_json(const nlohmann::json& doc) {
  ImportanceRanking r;
  try {
    r.label = doc.value("label", std::string{});
    r.method = ranking_method_from_string(doc.value("method", std::string{"shapley_surrogate"}));
    for (const auto& e : doc.at("entries")) {
      if (e.is_string()) {
        r.entries.emplace_back(e.get<std::string>(), 0.0);
      } else {
        r.entries.emplace_back(e.at("knob").get<std::string>(), e.value("importance", 0.0));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_failure, fmt::format("ranking: {}", e.what()));
  }
  return r;
}

ImportanceRanking shapley_importance(const std::vector<Observation>& observations, const ConfigurationSpace& space,
                                     int permutations_count, std::uint64_t seed) {
  const std::size_t d = space.dimension();
  if (permutations_count < 1) throw Error(ErrorCode::invalid_argument, "permutations_count must be >= 1");
  // Canonical row order makes the result independent of input order.
  std::vector<std::pair<std::vector<double>, double>> rows;
  for (const auto& obs : observations) {
    if (obs.ok()) rows.emplace_back(normalize(space, obs.config), obs.feedback->objective);
  }
  if (rows.size() < 2 * d) {
    throw Error(ErrorCode::insufficient_data,
                fmt::format("{} observations, need at least {} for {} knobs", rows.size(), 2 * d, d));
  }
  std::sort(rows.begin(), rows.end());

  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(d));
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& [p, v] = rows[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < d; ++j) x(i, static_cast<Eigen::Index>(j)) = p[j];
    y(i) = v;
  }
  std::mt19937_64 rng(seed);
  ForestOptions fo;
  fo.seed = rng();
  const ForestModel model = ForestModel::fit(x, y, fo);

  const std::vector<double> base = normalize(space, space.defaults());
  std::vector<double> total(d, 0.0);
  std::vector<std::size_t> order(d);
  std::uniform_int_distribution<Eigen::Index> pick_row(0, n - 1);
  std::vector<double> point(d);
  for (int p = 0; p < permutations_count; ++p) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const Eigen::Index r = pick_row(rng);
    point = base;
    double prev = model.predict_mean(point.data());
    for (std::size_t i : order) {
      point[i] = x(r, static_cast<Eigen::Index>(i));
      const double next = model.predict_mean(point.data());
      total[i] += std::abs(next - prev);
      prev = next;
    }
  }

  ImportanceRanking ranking;
  ranking.label = "shapley";
  ranking.method = RankingMethod::shapley_surrogate;
  for (std::size_t i = 0; i < d; ++i) {
    ranking.entries.emplace_back(space.knobs()[i].name, total[i] / permutations_count);
  }
  std::stable_sort(ranking.entries.begin(), ranking.entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return ranking;
}

PruningReport pruning_report(const std::vector<ImportanceRanking>& rankings, const ImportanceRanking& reference,
                             std::size_t k) {
  if (k == 0) throw Error(ErrorCode::invalid_k, "k must be >= 1");
  auto require = [k](const ImportanceRanking& r) {
    if (k > r.entries.size()) {
      throw Error(ErrorCode::invalid_k,
                  fmt::format("k={} exceeds the {} entries of ranking '{}'", k, r.entries.size(), r.label));
    }
  };
  require(reference);
  PruningReport report;
  report.k = k;
  report.reference_label = reference.label;
  report.reference_top_k = reference.top(k);
  const std::set<std::string> ref(report.reference_top_k.begin(), report.reference_top_k.end());
  for (const auto& r : rankings) {
    require(r);
    PruningComparison row;
    row.label = r.label;
    row.top_k = r.top(k);
    const std::set<std::string> mine(row.top_k.begin(), row.top_k.end());
    for (const auto& name : row.top_k) {
      if (ref.count(name) != 0) {
        ++row.overlap;
      } else {
        row.only_in_ranking.push_back(name);
      }
    }
    for (const auto& name : report.reference_top_k) {
      if (mine.count(name) == 0) row.only_in_reference.push_back(name);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

nlohmann::json pruning_report_to_json(const PruningReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"label", r.label},
                    {"top_k", r.top_k},
                    {"overlap", r.overlap},
                    {"only_in_ranking", r.only_in_ranking},
                    {"only_in_reference", r.only_in_reference}});
  }
  return {{"k", report.k},
          {"reference", report.reference_label},
          {"reference_top_k", report.reference_top_k},
          {"rows", rows}};
}

std::string pruning_report_to_text(const PruningReport& report) {
  std::size_t width = report.reference_label.size();
  for (const auto& r : report.rows) width = std::max(width, r.label.size());
  std::string out = fmt::format("top-{} knobs, reference: {}\n", report.k, report.reference_label);
  out += fmt::format("{:<{}}  {}\n", report.reference_label, width, fmt::join(report.reference_top_k, ", "));
  for (const auto& r : report.rows) {
    out += fmt::format("{:<{}}  overlap {}/{}\n", r.label, width, r.overlap, report.k);
    out += fmt::format("{:<{}}    only here:      {}\n", "", width,
                       r.only_in_ranking.empty() ? "-" : fmt::format("{}", fmt::join(r.only_in_ranking, ", ")));
    out += fmt::format("{:<{}}    only reference: {}\n", "", width,
                       r.only_in_reference.empty() ? "-" : fmt::format("{}", fmt::join(r.only_in_reference, ", ")));
  }
  return out;
}

PrunedSpace data_driven_pruned_space(const ConfigurationSpace& space, const ImportanceRanking& ranking,
                                     const std::vector<Observation>& observations, std::size_t k,
                                     ObjectiveKind kind) {
  if (k == 0 || k > ranking.entries.size()) {
    throw Error(ErrorCode::invalid_k, fmt::format("k={} outside [1, {}]", k, ranking.entries.size()));
  }
  std::vector<const Observation*> ok;
  for (const auto& obs : observations) {
    if (obs.ok()) ok.push_back(&obs);
  }
  if (ok.empty()) throw Error(ErrorCode::insufficient_data, "no successful observations to derive ranges from");
  std::stable_sort(ok.begin(), ok.end(), [kind](const Observation* a, const Observation* b) {
    return better(kind, a->feedback->objective, b->feedback->objective);
  });
  ok.resize(std::max<std::size_t>(1, (ok.size() + 9) / 10));

  PrunedSpace pruned;
  pruned.parent = space;
  for (const auto& name : ranking.top(k)) {
    const Knob& knob = space.knob(name);
    Narrowing n;
    if (knob.is_numeric()) {
      std::vector<double> values;
      for (const auto* obs : ok) values.push_back(obs->config.number(name));
      double lo = percentile(values, 0.1);
      double hi = percentile(values, 0.9);
      if (knob.type == KnobType::integer) {
        lo = std::ceil(lo);
        hi = std::floor(hi);
      }
      if (lo < hi) {
        n.min = lo;
        n.max = hi;
      } else {
        n.min = knob.min;
        n.max = knob.max;
      }
    } else {
      const std::vector<std::string> all =
          knob.type == KnobType::boolean ? std::vector<std::string>{"false", "true"} : knob.choices;
      std::set<std::string> seen;
      for (const auto* obs : ok) seen.insert(choice_of(knob, obs->config.at(name)));
      for (const auto& c : all) {
        if (seen.count(c) != 0) n.choices.push_back(c);
      }
    }
    pruned.selected.push_back(name);
    pruned.narrowed.emplace(name, std::move(n));
  }
  pruned.check(k);
  return pruned;
}

}  // namespace knobforge
