// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

// Knobs, configuration spaces, and configurations.
//
// A configuration space is an ordered list of typed knobs. A configuration
// assigns exactly one legal value to every knob of a space. Candidates coming
// from outside (LLM replies, history files, seeds files) are raw JSON objects
// and enter the system only through validate_configuration() or
// coerce_configuration().

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace knobforge {

enum class KnobType { integer, real, enumeration, boolean };

std::string_view to_string(KnobType type);
KnobType knob_type_from_string(std::string_view text);

// Integer and real knobs both hold doubles; integer knobs only ever hold
// integral values. Catalog ranges reach 2^64, beyond int64.
using KnobValue = std::variant<double, bool, std::string>;

struct Knob {
  std::string name;
  KnobType type = KnobType::real;
  double min = 0.0;
  double max = 1.0;
  std::vector<std::string> choices;
  KnobValue default_value = 0.0;
  std::string unit;
  std::string description;
  bool restart_required = false;

  bool is_numeric() const {
    return type == KnobType::integer || type == KnobType::real;
  }

  // Throws Error{invalid_space} when the knob's own invariants do not hold.
  void check() const;
};

class Configuration {
 public:
  Configuration() = default;
  explicit Configuration(std::map<std::string, KnobValue> values)
      : values_(std::move(values)) {}

  const std::map<std::string, KnobValue>& values() const { return values_; }
  bool contains(const std::string& name) const { return values_.count(name) != 0; }
  const KnobValue& at(const std::string& name) const;
  double number(const std::string& name) const;
  void set(const std::string& name, KnobValue value) { values_[name] = std::move(value); }
  std::size_t size() const { return values_.size(); }

  friend bool operator==(const Configuration&, const Configuration&) = default;

 private:
  std::map<std::string, KnobValue> values_;
};

class ConfigurationSpace {
 public:
  ConfigurationSpace() = default;
  explicit ConfigurationSpace(std::vector<Knob> knobs);

  const std::vector<Knob>& knobs() const { return knobs_; }
  std::size_t dimension() const { return knobs_.size(); }
  const Knob* find(std::string_view name) const;
  const Knob& knob(std::string_view name) const;
  std::optional<std::size_t> index_of(std::string_view name) const;

  Configuration defaults() const;

  friend bool operator==(const ConfigurationSpace& a, const ConfigurationSpace& b);

 private:
  std::vector<Knob> knobs_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

enum class ViolationKind { unknown_knob, missing_knob, type_mismatch, out_of_range };

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string knob;
  std::string detail;
};

struct Coercion {
  std::string knob;
  std::string detail;
};

enum class CoercionPolicy { clamp_round, reject };

CoercionPolicy coercion_policy_from_string(std::string_view text);

struct CoercionResult {
  std::optional<Configuration> config;
  std::vector<Violation> violations;
  std::vector<Coercion> log;

  bool ok() const { return config.has_value(); }
};

// Strict check of a raw name->value JSON object. Never throws on bad input;
// every problem is reported as a violation.
CoercionResult validate_configuration(const ConfigurationSpace& space,
                                      const nlohmann::json& candidate);

// Under clamp_round: integer values are rounded half away from zero, numbers
// are clamped into range, numeric strings and boolean spellings are converted,
// unknown knobs are dropped and missing knobs are filled from `fill` (the
// space defaults when null). Enumeration values outside the choices are never
// coerced. Under reject this is validate_configuration().
CoercionResult coerce_configuration(const ConfigurationSpace& space,
                                    const nlohmann::json& candidate,
                                    CoercionPolicy policy,
                                    const Configuration* fill = nullptr);

bool is_valid(const ConfigurationSpace& space, const Configuration& config);

nlohmann::json value_to_json(const Knob& knob, const KnobValue& value);
nlohmann::json to_json(const ConfigurationSpace& space, const Configuration& config);
std::string format_value(const Knob& knob, const KnobValue& value);

// Unit-hypercube embedding: numeric knobs affinely, enumerations by
// index/(|choices|-1), booleans to {0,1}.
std::vector<double> normalize(const ConfigurationSpace& space, const Configuration& config);
Configuration denormalize(const ConfigurationSpace& space, std::span<const double> point);

// Restores the knobs a smaller space does not cover from `full`'s defaults.
Configuration expand_to(const ConfigurationSpace& full, const Configuration& partial);

struct Narrowing {
  double min = 0.0;
  double max = 0.0;
  std::vector<std::string> choices;  // enumeration/boolean knobs only
};

struct PrunedSpace {
  ConfigurationSpace parent;
  std::vector<std::string> selected;
  std::map<std::string, Narrowing> narrowed;

  // Throws Error{invalid_space} unless selected knobs exist, ranges are
  // contained in the parent and non-degenerate, and |selected| == k.
  void check(std::optional<std::size_t> k = std::nullopt) const;
};

ConfigurationSpace apply_pruned(const PrunedSpace& pruned);

// Catalog file: JSON array of {name, type, min, max, choices, default, unit,
// description, restart_required}. Unknown keys are ignored.
ConfigurationSpace space_from_json(const nlohmann::json& catalog);
nlohmann::json space_to_json(const ConfigurationSpace& space);
ConfigurationSpace load_catalog(const std::filesystem::path& path);

nlohmann::json pruned_to_json(const PrunedSpace& pruned);
PrunedSpace pruned_from_json(const ConfigurationSpace& parent, const nlohmann::json& doc);

// Stable 64-bit FNV-1a digest of the canonical catalog JSON, as hex.
std::string space_digest(const ConfigurationSpace& space);

}  // namespace knobforge
