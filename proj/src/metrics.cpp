// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#include "knobforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "knobforge/error.hpp"

namespace knobforge {

namespace {

const Observation* first_success(const RunHistory& h) {
  for (const auto& o : h.observations) {
    if (o.ok()) return &o;
  }
  return nullptr;
}

}  // namespace

double compute_odp(const RunHistory& history) {
  const Observation* first = first_success(history);
  if (first == nullptr) throw Error(ErrorCode::empty_history, "history has no successful observation");
  double best = first->feedback->objective;
  for (const auto& o : history.observations) {
    if (o.ok() && better(history.objective_kind, o.feedback->objective, best)) best = o.feedback->objective;
  }
  return best;
}

int compute_tes(const RunHistory& history) {
  // Peak over suggested configurations; the default itself is not a tuning step.
  std::optional<double> best;
  int at = 0;
  for (const auto& o : history.observations) {
    if (o.iteration < 1 || !o.ok()) continue;
    if (!best || better(history.objective_kind, o.feedback->objective, *best)) {
      best = o.feedback->objective;
      at = o.iteration;
    }
  }
  if (!best) throw Error(ErrorCode::empty_history, "history has no successful non-default observation");
  return at;
}

double compute_ir(const RunHistory& history) {
  for (const auto& o : history.observations) {
    if (o.iteration == 1 && o.ok()) return o.feedback->objective;
  }
  throw Error(ErrorCode::missing_first_refinement, "history has no successful iteration 1");
}

double compute_pe(double odp_orig, double odp_init, ObjectiveKind kind) {
  if (!(odp_orig > 0.0)) throw Error(ErrorCode::invalid_argument, "PE needs a positive base ODP");
  const double pe = (odp_init - odp_orig) / odp_orig;
  return maximizes(kind) ? pe : -pe;
}

double compute_speedup(int tes_orig, int tes_init) {
  if (tes_orig < 1) throw Error(ErrorCode::invalid_argument, "speedup needs a base TES >= 1");
  return static_cast<double>(tes_orig - tes_init) / static_cast<double>(tes_orig);
}

std::vector<double> best_so_far(const RunHistory& history) {
  std::vector<double> curve;
  for (const auto& o : history.observations) {
    if (!o.ok()) continue;
    const double v = o.feedback->objective;
    curve.push_back(curve.empty() || better(history.objective_kind, v, curve.back()) ? v : curve.back());
  }
  return curve;
}

MetricsReport compute_report(const RunHistory& history) {
  MetricsReport r;
  r.method_label = history.method_label;
  r.objective_kind = history.objective_kind;
  r.odp = compute_odp(history);
  try {
    r.ir = compute_ir(history);
  } catch (const Error&) {
  }
  try {
    r.tes = compute_tes(history);
  } catch (const Error&) {
  }
  return r;
}

ComparisonReport comparison_report(const std::vector<RunHistory>& histories,
                                   std::optional<std::size_t> base) {
  if (histories.empty()) throw Error(ErrorCode::empty_history, "report needs at least one history");
  ComparisonReport report;
  report.objective_kind = histories.front().objective_kind;
  for (const auto& h : histories) {
    if (h.objective_kind != report.objective_kind) {
      throw Error(ErrorCode::mixed_objective_kinds,
                  fmt::format("history '{}' reports {}, expected {}", h.method_label,
                              to_string(h.objective_kind), to_string(report.objective_kind)));
    }
    report.rows.push_back(compute_report(h));
  }
  if (base) {
    if (*base >= histories.size()) throw Error(ErrorCode::invalid_argument, "base index out of range");
    report.has_base = true;
    const MetricsReport& b = report.rows[*base];
    for (auto& row : report.rows) {
      row.pe = compute_pe(b.odp, row.odp, report.objective_kind);
      if (b.tes && row.tes) row.speedup = compute_speedup(*b.tes, *row.tes);
    }
  }
  return report;
}

nlohmann::json report_to_json(const ComparisonReport& report) {
  nlohmann::json doc;
  doc["objective_kind"] = std::string(to_string(report.objective_kind));
  doc["odp_label"] = maximizes(report.objective_kind) ? "ODP" : "ODP_AP";
  doc["rows"] = nlohmann::json::array();
  for (const auto& r : report.rows) {
    nlohmann::json row;
    row["method_label"] = r.method_label;
    row["ir"] = r.ir ? nlohmann::json(*r.ir) : nlohmann::json(nullptr);
    row["odp"] = r.odp;
    row["tes"] = r.tes ? nlohmann::json(*r.tes) : nlohmann::json(nullptr);
    if (report.has_base) {
      row["pe"] = r.pe ? nlohmann::json(*r.pe) : nlohmann::json(nullptr);
      row["speedup"] = r.speedup ? nlohmann::json(*r.speedup) : nlohmann::json(nullptr);
    }
    doc["rows"].push_back(std::move(row));
  }
  return doc;
}

std::string report_to_text(const ComparisonReport& report) {
  const bool tps = maximizes(report.objective_kind);
  std::vector<std::string> header{"Method", tps ? "IR TPS" : "IR Latency", tps ? "ODP" : "ODP_AP", "TES"};
  if (report.has_base) {
    header.emplace_back("PE");
    header.emplace_back("Speedup");
  }
  std::vector<std::vector<std::string>> cells{header};
  for (const auto& r : report.rows) {
    std::vector<std::string> row{r.method_label.empty() ? "-" : r.method_label,
                                 r.ir ? fmt::format("{:.2f}", *r.ir) : "-", fmt::format("{:.2f}", r.odp),
                                 r.tes ? std::to_string(*r.tes) : "-"};
    if (report.has_base) {
      row.push_back(r.pe ? fmt::format("{:.2f}%", *r.pe * 100.0) : "-");
      row.push_back(r.speedup ? fmt::format("{:.2f}%", *r.speedup * 100.0) : "-");
    }
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      if (i == 0) {
        out += fmt::format("{:<{}}", cells[r][i], width[i]);
      } else {
        out += fmt::format("  {:>{}}", cells[r][i], width[i]);
      }
    }
    out += '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      out += std::string(total - 2, '-') + '\n';
    }
  }
  return out;
}

nlohmann::json configuration_to_json(const Configuration& config) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, value] : config.values()) {
    if (const auto* d = std::get_if<double>(&value)) {
      if (std::floor(*d) == *d && std::fabs(*d) < 9.0e18) {
        out[name] = static_cast<std::int64_t>(*d);
      } else if (std::floor(*d) == *d && *d > 0 && *d < 18446744073709551616.0) {
        out[name] = static_cast<std::uint64_t>(*d);
      } else {
        out[name] = *d;
      }
    } else if (const auto* b = std::get_if<bool>(&value)) {
      out[name] = *b;
    } else {
      out[name] = std::get<std::string>(value);
    }
  }
  return out;
}

Configuration configuration_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::parse_failure, "configuration is not a JSON object");
  Configuration config;
  for (const auto& [name, v] : doc.items()) {
    if (v.is_boolean()) {
      config.set(name, v.get<bool>());
    } else if (v.is_number()) {
      config.set(name, v.get<double>());
    } else if (v.is_string()) {
      config.set(name, v.get<std::string>());
    } else {
      throw Error(ErrorCode::parse_failure, fmt::format("knob '{}' has a non-scalar value", name));
    }
  }
  return config;
}

nlohmann::json history_header(const RunHistory& history) {
  return {{"session_id", history.session_id},
          {"method_label", history.method_label},
          {"space_digest", history.space_digest},
          {"objective_kind", std::string(to_string(history.objective_kind))}};
}

nlohmann::json observation_to_json(const Observation& obs, ObjectiveKind kind) {
  nlohmann::json line;
  line["iteration"] = obs.iteration;
  line["config"] = configuration_to_json(obs.config);
  line["objective_kind"] = std::string(to_string(kind));
  line["status"] = std::string(to_string(obs.status));
  line["timestamp"] = obs.timestamp;
  if (obs.feedback) {
    line["objective"] = obs.feedback->objective;
    line["internal_metrics"] = obs.feedback->internal_metrics;
    line["eval_duration_seconds"] = obs.feedback->eval_duration_seconds;
  } else {
    line["objective"] = nullptr;
    line["internal_metrics"] = nlohmann::json::object();
  }
  if (!obs.notes.empty()) line["notes"] = obs.notes;
  return line;
}

Observation observation_from_json(const nlohmann::json& line) {
  Observation obs;
  obs.iteration = line.at("iteration").get<int>();
  obs.config = configuration_from_json(line.at("config"));
  obs.status = eval_status_from_string(line.at("status").get<std::string>());
  obs.timestamp = line.value("timestamp", 0.0);
  if (line.contains("notes")) obs.notes = line.at("notes").get<std::vector<std::string>>();
  const auto& objective = line.at("objective");
  if (!objective.is_null()) {
    Feedback fb;
    fb.kind = objective_kind_from_string(line.at("objective_kind").get<std::string>());
    fb.objective = objective.get<double>();
    if (line.contains("internal_metrics")) {
      fb.internal_metrics = line.at("internal_metrics").get<std::map<std::string, double>>();
    }
    fb.eval_duration_seconds = line.value("eval_duration_seconds", 0.0);
    obs.feedback = std::move(fb);
  }
  return obs;
}

void write_history(std::ostream& out, const RunHistory& history) {
  out << history_header(history).dump() << '\n';
  for (const auto& o : history.observations) {
    out << observation_to_json(o, history.objective_kind).dump() << '\n';
  }
}

void save_history(const std::filesystem::path& path, const RunHistory& history) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, fmt::format("cannot write history '{}'", path.string()));
  write_history(out, history);
}

RunHistory read_history(std::istream& in, const std::string& source) {
  RunHistory history;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::optional<ObjectiveKind> kind;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto doc = nlohmann::json::parse(line);
      if (!have_header) {
        history.session_id = doc.at("session_id").get<std::string>();
        history.method_label = doc.at("method_label").get<std::string>();
        history.space_digest = doc.at("space_digest").get<std::string>();
        if (doc.contains("objective_kind")) {
          kind = objective_kind_from_string(doc.at("objective_kind").get<std::string>());
        }
        have_header = true;
        continue;
      }
      const auto line_kind = objective_kind_from_string(doc.at("objective_kind").get<std::string>());
      if (kind && *kind != line_kind) {
        throw Error(ErrorCode::mixed_objective_kinds, "objective kind differs from earlier lines");
      }
      kind = line_kind;
      Observation obs = observation_from_json(doc);
      if (!history.observations.empty() && obs.iteration <= history.observations.back().iteration) {
        throw Error(ErrorCode::parse_failure, "iteration indices must be strictly increasing");
      }
      history.observations.push_back(std::move(obs));
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("{}:{}: {}", source, line_no, e.what()));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::parse_failure, fmt::format("{}:{}: {}", source, line_no, e.what()));
    }
  }
  if (!have_header) throw Error(ErrorCode::parse_failure, fmt::format("{}: missing header line", source));
  history.objective_kind = kind.value_or(ObjectiveKind::throughput_tps);
  return history;
}

RunHistory load_history(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, fmt::format("cannot open history '{}'", path.string()));
  return read_history(in, path.string());
}

}  // namespace knobforge
