// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#include "knobforge/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>

#include <fmt/format.h>

#include "knobforge/error.hpp"
#include "knobforge/forest.hpp"
#include "knobforge/gp.hpp"
#include "knobforge/sampling.hpp"

namespace knobforge {

void TunerBudget::check() const {
  if (max_iterations < 1) throw Error(ErrorCode::invalid_argument, "budget: max_iterations must be >= 1");
  if (init_points < 1) throw Error(ErrorCode::invalid_argument, "budget: init_points must be >= 1");
  if (init_points > max_iterations) {
    throw Error(ErrorCode::invalid_argument,
                fmt::format("budget: init_points {} exceeds max_iterations {}", init_points, max_iterations));
  }
}

RunRecorder::RunRecorder(Target& target, ObjectiveKind kind, const RunContext& context)
    : target_(target), sink_(context.sink), replay_(context.replay) {
  history_.session_id = context.session_id;
  history_.method_label = context.method_label;
  history_.space_digest = context.space_digest;
  history_.objective_kind = kind;
}

const Observation& RunRecorder::evaluate(const Configuration& config, std::vector<std::string> notes) {
  const int iteration = static_cast<int>(history_.observations.size());
  const auto index = static_cast<std::size_t>(iteration);
  if (replay_valid_ && index < replay_.size() && replay_[index].config == config) {
    Observation obs = replay_[index];
    obs.iteration = iteration;
    clock_offset_ = obs.timestamp;
    history_.observations.push_back(std::move(obs));
    ++replayed_;
  } else {
    replay_valid_ = false;
    Observation obs;
    obs.iteration = iteration;
    obs.config = config;
    obs.notes = std::move(notes);
    EvalOutcome outcome = target_.evaluate(config);
    obs.status = outcome.status;
    // A resumed run continues the interrupted run's timeline.
    obs.timestamp = clock_offset_ + target_.now();
    if (outcome.ok()) {
      obs.feedback = std::move(outcome.feedback);
    } else {
      obs.status = outcome.status == EvalStatus::ok ? EvalStatus::evaluation_failed : outcome.status;
      if (!outcome.message.empty()) obs.notes.push_back(outcome.message);
    }
    history_.observations.push_back(std::move(obs));
  }
  if (sink_) sink_(history_.observations.back());
  return history_.observations.back();
}

namespace {

enum class Surrogate { gp, forest };

std::string config_key(const ConfigurationSpace& space, const Configuration& config) {
  return to_json(space, config).dump();
}

// Unique ok observations as a design matrix; duplicate inputs are averaged.
void training_data(const ConfigurationSpace& space, const RunHistory& history, Eigen::MatrixXd& x,
                   Eigen::VectorXd& y) {
  std::map<std::vector<double>, std::pair<double, int>> merged;
  std::vector<std::vector<double>> order;
  for (const auto& obs : history.observations) {
    if (!obs.ok()) continue;
    auto p = normalize(space, obs.config);
    auto [it, fresh] = merged.try_emplace(p, 0.0, 0);
    if (fresh) order.push_back(p);
    it->second.first += obs.feedback->objective;
    it->second.second += 1;
  }
  const auto d = static_cast<Eigen::Index>(space.dimension());
  x.resize(static_cast<Eigen::Index>(order.size()), d);
  y.resize(static_cast<Eigen::Index>(order.size()));
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < d; ++j) x(r, j) = order[i][static_cast<std::size_t>(j)];
    const auto& [sum, count] = merged.at(order[i]);
    y(r) = sum / count;
  }
}

const Observation* incumbent(const RunHistory& history) {
  const Observation* best = nullptr;
  for (const auto& obs : history.observations) {
    if (!obs.ok()) continue;
    if (best == nullptr || better(history.objective_kind, obs.feedback->objective, best->feedback->objective)) {
      best = &obs;
    }
  }
  return best;
}

// Candidate configurations in [0,1]^d, snapped to the space's grid and
// excluding anything already evaluated.
std::vector<std::pair<Configuration, std::vector<double>>> candidates(const ConfigurationSpace& space,
                                                                      const RunHistory& history,
                                                                      const std::set<std::string>& seen,
                                                                      const OptimizerOptions& options,
                                                                      std::mt19937_64& rng) {
  std::vector<std::vector<double>> raw =
      lhs_points(space.dimension(), static_cast<std::size_t>(std::max(1, options.lhs_candidates)), rng);
  if (const Observation* best = incumbent(history); best != nullptr && options.local_candidates > 0) {
    const auto center = normalize(space, best->config);
    const int m = options.local_candidates;
    for (int i = 0; i < m; ++i) {
      // Step sizes shrink geometrically from 0.2 to 0.005.
      const double sd = m == 1 ? 0.05 : 0.2 * std::pow(0.025, static_cast<double>(i) / (m - 1));
      std::normal_distribution<double> noise(0.0, sd);
      auto p = center;
      for (auto& v : p) v = std::clamp(v + noise(rng), 0.0, 1.0);
      raw.push_back(std::move(p));
    }
  }
  std::vector<std::pair<Configuration, std::vector<double>>> out;
  std::set<std::string> local;
  for (const auto& p : raw) {
    Configuration c = denormalize(space, p);
    std::string key = config_key(space, c);
    if (seen.count(key) != 0 || !local.insert(key).second) continue;
    auto snapped = normalize(space, c);
    out.emplace_back(std::move(c), std::move(snapped));
  }
  return out;
}

RunHistory model_based_run(Surrogate surrogate, Target& target, const ConfigurationSpace& space,
                           const TunerBudget& budget, const std::vector<Configuration>& seeds,
                           const OptimizerOptions& options, const RunContext& context) {
  budget.check();
  if (seeds.size() > static_cast<std::size_t>(budget.init_points)) {
    throw Error(ErrorCode::invalid_argument,
                fmt::format("{} seeds exceed init_points {}", seeds.size(), budget.init_points));
  }
  for (const auto& s : seeds) {
    if (!is_valid(space, s)) throw Error(ErrorCode::invalid_argument, "seed configuration is not valid in the space");
  }
  RunContext ctx = context;
  if (ctx.method_label.empty()) ctx.method_label = surrogate == Surrogate::gp ? "VBO" : "SMAC";
  if (ctx.space_digest.empty()) ctx.space_digest = space_digest(space);
  RunRecorder recorder(target, target.objective_kind(), ctx);
  const bool maximize = maximizes(target.objective_kind());
  std::mt19937_64 rng(budget.rng_seed);
  std::set<std::string> seen;

  auto record = [&](const Configuration& c, std::vector<std::string> notes = {}) {
    seen.insert(config_key(space, c));
    recorder.evaluate(c, std::move(notes));
  };

  record(space.defaults());
  std::vector<Configuration> init(seeds.begin(), seeds.end());
  const auto fill = static_cast<std::size_t>(budget.init_points) - init.size();
  if (fill > 0) {
    for (auto& c : lhs_sample(space, fill, rng())) init.push_back(std::move(c));
  }
  for (const auto& c : init) record(c);
  if (std::none_of(recorder.history().observations.begin(), recorder.history().observations.end(),
                   [](const Observation& o) { return o.ok(); })) {
    throw Error(ErrorCode::target_unavailable, "every initial evaluation failed");
  }

  std::optional<GpHyper> warm;
  int suggestion = 0;
  while (static_cast<int>(recorder.history().observations.size()) < budget.max_iterations + 1) {
    ++suggestion;
    const bool interleave = surrogate == Surrogate::forest && options.random_interleave > 0 &&
                            suggestion % options.random_interleave == 0;
    std::optional<Configuration> next;
    std::vector<std::string> notes;
    if (!interleave) {
      Eigen::MatrixXd x;
      Eigen::VectorXd y;
      training_data(space, recorder.history(), x, y);
      auto pool = candidates(space, recorder.history(), seen, options, rng);
      if (!pool.empty() && x.rows() >= 2) {
        const double best = incumbent(recorder.history())->feedback->objective;
        Eigen::MatrixXd cand(static_cast<Eigen::Index>(pool.size()), x.cols());
        for (std::size_t i = 0; i < pool.size(); ++i) {
          for (Eigen::Index j = 0; j < x.cols(); ++j) {
            cand(static_cast<Eigen::Index>(i), j) = pool[i].second[static_cast<std::size_t>(j)];
          }
        }
        Eigen::VectorXd mean(cand.rows());
        Eigen::VectorXd var(cand.rows());
        bool fitted = true;
        try {
          if (surrogate == Surrogate::gp) {
            GpFitOptions fit;
            fit.restarts = options.gp_restarts;
            fit.seed = rng();
            if (warm) fit.initial = &*warm;
            GPModel model = GPModel::fit(x, y, fit);
            warm = model.hyper();
            std::tie(mean, var) = model.predict_many(cand);
          } else {
            ForestOptions fo = options.forest;
            fo.seed = rng();
            ForestModel model = ForestModel::fit(x, y, fo);
            for (Eigen::Index i = 0; i < cand.rows(); ++i) {
              std::tie(mean(i), var(i)) = model.predict(cand.row(i).transpose());
            }
          }
        } catch (const Error& e) {
          if (e.code() != ErrorCode::fit_failed && e.code() != ErrorCode::insufficient_data) throw;
          fitted = false;
          notes.push_back(fmt::format("surrogate fit failed, sampled at random: {}", e.what()));
        }
        if (fitted) {
          std::size_t pick = 0;
          double pick_ei = -1.0;
          double pick_var = -1.0;
          for (Eigen::Index i = 0; i < cand.rows(); ++i) {
            const double ei = expected_improvement(mean(i), var(i), best, maximize);
            // Ties (typically all-zero EI) go to the most uncertain candidate.
            if (ei > pick_ei || (ei == pick_ei && var(i) > pick_var)) {
              pick = static_cast<std::size_t>(i);
              pick_ei = ei;
              pick_var = var(i);
            }
          }
          next = pool[pick].first;
        }
      }
    }
    if (!next) {
      // Random draw; prefer something unseen when the space allows it.
      Configuration c = random_configuration(space, rng);
      for (int tries = 0; tries < 64 && seen.count(config_key(space, c)) != 0; ++tries) {
        c = random_configuration(space, rng);
      }
      next = std::move(c);
    }
    record(*next, std::move(notes));
  }
  return recorder.take();
}

}  // namespace

RunHistory vbo_run(Target& target, const ConfigurationSpace& space, const TunerBudget& budget,
                   const std::vector<Configuration>& seeds, const OptimizerOptions& options,
                   const RunContext& context) {
  return model_based_run(Surrogate::gp, target, space, budget, seeds, options, context);
}

RunHistory smac_run(Target& target, const ConfigurationSpace& space, const TunerBudget& budget,
                    const std::vector<Configuration>& seeds, const OptimizerOptions& options,
                    const RunContext& context) {
  return model_based_run(Surrogate::forest, target, space, budget, seeds, options, context);
}

MappingResult workload_mapping_init(const std::vector<RunHistory>& store, const Feedback& target_metrics,
                                    std::size_t top_n, const ConfigurationSpace& space) {
  // Default-configuration metrics of every usable stored session.
  std::vector<std::pair<std::size_t, const std::map<std::string, double>*>> sessions;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& obs = store[i].observations;
    if (obs.empty() || obs.front().iteration != 0 || !obs.front().ok()) continue;
    if (obs.front().feedback->internal_metrics.empty()) continue;
    sessions.emplace_back(i, &obs.front().feedback->internal_metrics);
  }
  if (sessions.empty()) throw Error(ErrorCode::no_history, "no stored session has default-configuration metrics");

  std::vector<std::string> shared;
  for (const auto& [name, value] : target_metrics.internal_metrics) {
    if (std::all_of(sessions.begin(), sessions.end(),
                    [&](const auto& s) { return s.second->count(name) != 0; })) {
      shared.push_back(name);
    }
  }
  if (shared.empty()) throw Error(ErrorCode::no_history, "stored sessions share no internal metrics with the target");

  std::vector<double> distance(sessions.size(), 0.0);
  for (const auto& name : shared) {
    std::vector<double> values;
    for (const auto& s : sessions) values.push_back(s.second->at(name));
    values.push_back(target_metrics.internal_metrics.at(name));
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
    const double t = (values.back() - mean) / sd;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
      const double z = (values[i] - mean) / sd;
      distance[i] += (z - t) * (z - t);
    }
  }
  const auto nearest = static_cast<std::size_t>(std::min_element(distance.begin(), distance.end()) - distance.begin());
  const RunHistory& chosen = store[sessions[nearest].first];

  std::vector<const Observation*> ranked;
  for (const auto& obs : chosen.observations) {
    if (obs.ok()) ranked.push_back(&obs);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [&](const Observation* a, const Observation* b) {
    return better(chosen.objective_kind, a->feedback->objective, b->feedback->objective);
  });

  MappingResult result;
  result.session_index = sessions[nearest].first;
  result.distance = std::sqrt(distance[nearest]);
  for (const Observation* obs : ranked) {
    if (result.observations.size() == top_n) break;
    CoercionResult c = coerce_configuration(space, configuration_to_json(obs->config), CoercionPolicy::clamp_round);
    if (!c.ok()) continue;
    Observation o = *obs;
    o.config = *c.config;
    for (const auto& entry : c.log) o.notes.push_back(fmt::format("{}: {}", entry.knob, entry.detail));
    result.observations.push_back(std::move(o));
  }
  return result;
}

RunHistory llm_tuning_run(Target& target, const ConfigurationSpace& space, const EnvironmentInfo& env,
                          ChatClient& client, int max_rounds, const AdvisorOptions& options,
                          const RunContext& context) {
  if (max_rounds < 0) throw Error(ErrorCode::invalid_argument, "max_rounds must be >= 0");
  RunContext ctx = context;
  if (ctx.method_label.empty()) ctx.method_label = "LLM";
  if (ctx.space_digest.empty()) ctx.space_digest = space_digest(space);
  RunRecorder recorder(target, target.objective_kind(), ctx);

  const Observation& first = recorder.evaluate(space.defaults());
  if (!first.ok()) throw Error(ErrorCode::target_unavailable, "default configuration could not be evaluated");
  Configuration current = first.config;
  Feedback feedback = *first.feedback;

  int consecutive_failures = 0;
  for (int round = 0; round < max_rounds; ++round) {
    RefineResult step;
    try {
      step = llm_refine_step(client, space, env, current, feedback, options);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::refine_failed) throw;
      if (++consecutive_failures >= kMaxConsecutiveRefineFailures) break;
      continue;
    }
    consecutive_failures = 0;
    std::vector<std::string> notes;
    for (const auto& entry : step.log) notes.push_back(fmt::format("{}: {}", entry.knob, entry.detail));
    const Observation& obs = recorder.evaluate(step.config, std::move(notes));
    if (obs.ok()) {
      current = obs.config;
      feedback = *obs.feedback;
    }
  }
  return recorder.take();
}

}  // namespace knobforge
