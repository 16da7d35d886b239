// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#include "knobforge/knobspace.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>

#include <fmt/format.h>

#include "knobforge/error.hpp"

namespace knobforge {

namespace {

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<double> parse_number(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  if (!std::isfinite(out)) return std::nullopt;
  return out;
}

std::optional<bool> parse_bool(std::string_view text) {
  const std::string t = lower(text);
  if (t == "on" || t == "true" || t == "1" || t == "yes") return true;
  if (t == "off" || t == "false" || t == "0" || t == "no") return false;
  return std::nullopt;
}

std::string number_text(double v) {
  if (std::floor(v) == v && std::fabs(v) < 9.2e18) {
    return fmt::format("{}", static_cast<std::int64_t>(v));
  }
  return fmt::format("{}", v);
}

std::string json_text(const nlohmann::json& v) { return v.dump(); }

// Outcome of checking one raw value against one knob.
struct ValueCheck {
  std::optional<KnobValue> value;
  std::optional<Violation> violation;
  std::vector<Coercion> log;
};

ValueCheck check_strict(const Knob& knob, const nlohmann::json& raw) {
  ValueCheck out;
  auto fail = [&](ViolationKind kind, std::string detail) {
    out.violation = Violation{kind, knob.name, std::move(detail)};
    return out;
  };
  switch (knob.type) {
    case KnobType::integer:
    case KnobType::real: {
      if (!raw.is_number()) {
        return fail(ViolationKind::type_mismatch,
                    fmt::format("expected a number, got {}", json_text(raw)));
      }
      const double v = raw.get<double>();
      if (knob.type == KnobType::integer && std::floor(v) != v) {
        return fail(ViolationKind::type_mismatch,
                    fmt::format("expected an integer, got {}", json_text(raw)));
      }
      if (v < knob.min || v > knob.max) {
        return fail(ViolationKind::out_of_range,
                    fmt::format("{} outside [{}, {}]", json_text(raw), number_text(knob.min),
                                number_text(knob.max)));
      }
      out.value = v;
      return out;
    }
    case KnobType::boolean:
      if (!raw.is_boolean()) {
        return fail(ViolationKind::type_mismatch,
                    fmt::format("expected a boolean, got {}", json_text(raw)));
      }
      out.value = raw.get<bool>();
      return out;
    case KnobType::enumeration: {
      if (!raw.is_string()) {
        return fail(ViolationKind::type_mismatch,
                    fmt::format("expected one of the choices, got {}", json_text(raw)));
      }
      const auto s = raw.get<std::string>();
      if (std::find(knob.choices.begin(), knob.choices.end(), s) == knob.choices.end()) {
        return fail(ViolationKind::out_of_range, fmt::format("\"{}\" is not a valid choice", s));
      }
      out.value = s;
      return out;
    }
  }
  return out;
}

ValueCheck check_lenient(const Knob& knob, const nlohmann::json& raw) {
  ValueCheck out;
  auto fail = [&](ViolationKind kind, std::string detail) {
    out.violation = Violation{kind, knob.name, std::move(detail)};
    return out;
  };
  switch (knob.type) {
    case KnobType::integer:
    case KnobType::real: {
      std::optional<double> v;
      if (raw.is_number()) {
        v = raw.get<double>();
      } else if (raw.is_string()) {
        v = parse_number(raw.get<std::string>());
        if (v) out.log.push_back({knob.name, fmt::format("parsed string {} as {}", json_text(raw), number_text(*v))});
      }
      if (!v) {
        return fail(ViolationKind::type_mismatch,
                    fmt::format("expected a number, got {}", json_text(raw)));
      }
      double x = *v;
      if (knob.type == KnobType::integer && std::floor(x) != x) {
        const double rounded = std::round(x);  // half away from zero
        out.log.push_back({knob.name, fmt::format("rounded {} to {}", number_text(x), number_text(rounded))});
        x = rounded;
      }
      if (x < knob.min || x > knob.max) {
        const double clamped = std::clamp(x, knob.min, knob.max);
        out.log.push_back({knob.name, fmt::format("clamped {} to {}", number_text(x), number_text(clamped))});
        x = clamped;
      }
      out.value = x;
      return out;
    }
    case KnobType::boolean: {
      if (raw.is_boolean()) {
        out.value = raw.get<bool>();
        return out;
      }
      std::optional<bool> b;
      if (raw.is_number()) {
        const double v = raw.get<double>();
        if (v == 0.0) b = false;
        if (v == 1.0) b = true;
      } else if (raw.is_string()) {
        b = parse_bool(raw.get<std::string>());
      }
      if (!b) {
        return fail(ViolationKind::type_mismatch,
                    fmt::format("expected a boolean, got {}", json_text(raw)));
      }
      out.log.push_back({knob.name, fmt::format("read {} as {}", json_text(raw), *b ? "true" : "false")});
      out.value = *b;
      return out;
    }
    case KnobType::enumeration: {
      std::string s;
      if (raw.is_string()) {
        s = raw.get<std::string>();
      } else if (raw.is_number()) {
        s = number_text(raw.get<double>());
        out.log.push_back({knob.name, fmt::format("read {} as \"{}\"", json_text(raw), s)});
      } else if (raw.is_boolean()) {
        s = raw.get<bool>() ? "ON" : "OFF";
        out.log.push_back({knob.name, fmt::format("read {} as \"{}\"", json_text(raw), s)});
      } else {
        return fail(ViolationKind::type_mismatch,
                    fmt::format("expected one of the choices, got {}", json_text(raw)));
      }
      if (std::find(knob.choices.begin(), knob.choices.end(), s) == knob.choices.end()) {
        out.log.clear();
        return fail(ViolationKind::out_of_range, fmt::format("\"{}\" is not a valid choice", s));
      }
      out.value = s;
      return out;
    }
  }
  return out;
}

bool value_in_knob(const Knob& knob, const KnobValue& value) {
  switch (knob.type) {
    case KnobType::integer:
    case KnobType::real: {
      const auto* v = std::get_if<double>(&value);
      if (v == nullptr || !std::isfinite(*v)) return false;
      if (knob.type == KnobType::integer && std::floor(*v) != *v) return false;
      return *v >= knob.min && *v <= knob.max;
    }
    case KnobType::boolean:
      return std::holds_alternative<bool>(value);
    case KnobType::enumeration: {
      const auto* s = std::get_if<std::string>(&value);
      return s != nullptr &&
             std::find(knob.choices.begin(), knob.choices.end(), *s) != knob.choices.end();
    }
  }
  return false;
}

}  // namespace

std::string_view to_string(KnobType type) {
  switch (type) {
    case KnobType::integer: return "integer";
    case KnobType::real: return "real";
    case KnobType::enumeration: return "enumeration";
    case KnobType::boolean: return "boolean";
  }
  return "real";
}

KnobType knob_type_from_string(std::string_view text) {
  const std::string t = lower(text);
  if (t == "integer" || t == "int") return KnobType::integer;
  if (t == "real" || t == "float" || t == "double") return KnobType::real;
  if (t == "enumeration" || t == "enum") return KnobType::enumeration;
  if (t == "boolean" || t == "bool") return KnobType::boolean;
  throw Error(ErrorCode::invalid_space, fmt::format("unknown knob type '{}'", text));
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::unknown_knob: return "unknown_knob";
    case ViolationKind::missing_knob: return "missing_knob";
    case ViolationKind::type_mismatch: return "type_mismatch";
    case ViolationKind::out_of_range: return "out_of_range";
  }
  return "unknown";
}

CoercionPolicy coercion_policy_from_string(std::string_view text) {
  if (text == "clamp_round") return CoercionPolicy::clamp_round;
  if (text == "reject") return CoercionPolicy::reject;
  throw Error(ErrorCode::config_error, fmt::format("unknown coercion policy '{}'", text));
}

void Knob::check() const {
  if (name.empty()) throw Error(ErrorCode::invalid_space, "knob with empty name");
  if (is_numeric()) {
    if (!(min < max)) {
      throw Error(ErrorCode::invalid_space,
                  fmt::format("knob '{}': min must be strictly below max", name));
    }
    if (type == KnobType::integer && (std::floor(min) != min || std::floor(max) != max)) {
      throw Error(ErrorCode::invalid_space, fmt::format("knob '{}': non-integral bounds", name));
    }
  } else if (type == KnobType::enumeration && choices.empty()) {
    throw Error(ErrorCode::invalid_space, fmt::format("knob '{}': no choices", name));
  }
  if (!value_in_knob(*this, default_value)) {
    throw Error(ErrorCode::invalid_space, fmt::format("knob '{}': default outside range", name));
  }
}

const KnobValue& Configuration::at(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) {
    throw Error(ErrorCode::invalid_argument, fmt::format("configuration has no knob '{}'", name));
  }
  return it->second;
}

double Configuration::number(const std::string& name) const {
  const auto& v = at(name);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
  throw Error(ErrorCode::invalid_argument, fmt::format("knob '{}' is not numeric", name));
}

ConfigurationSpace::ConfigurationSpace(std::vector<Knob> knobs) : knobs_(std::move(knobs)) {
  if (knobs_.empty()) throw Error(ErrorCode::invalid_space, "configuration space has no knobs");
  for (std::size_t i = 0; i < knobs_.size(); ++i) {
    knobs_[i].check();
    if (!index_.emplace(knobs_[i].name, i).second) {
      throw Error(ErrorCode::invalid_space, fmt::format("duplicate knob '{}'", knobs_[i].name));
    }
  }
}

const Knob* ConfigurationSpace::find(std::string_view name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &knobs_[it->second];
}

const Knob& ConfigurationSpace::knob(std::string_view name) const {
  const Knob* k = find(name);
  if (k == nullptr) throw Error(ErrorCode::invalid_argument, fmt::format("unknown knob '{}'", name));
  return *k;
}

std::optional<std::size_t> ConfigurationSpace::index_of(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Configuration ConfigurationSpace::defaults() const {
  std::map<std::string, KnobValue> values;
  for (const auto& k : knobs_) values.emplace(k.name, k.default_value);
  return Configuration(std::move(values));
}

bool operator==(const ConfigurationSpace& a, const ConfigurationSpace& b) {
  return space_to_json(a) == space_to_json(b);
}

CoercionResult validate_configuration(const ConfigurationSpace& space,
                                      const nlohmann::json& candidate) {
  CoercionResult result;
  if (!candidate.is_object()) {
    result.violations.push_back({ViolationKind::type_mismatch, "", "candidate is not a JSON object"});
    return result;
  }
  std::map<std::string, KnobValue> values;
  for (const auto& [name, raw] : candidate.items()) {
    const Knob* knob = space.find(name);
    if (knob == nullptr) {
      result.violations.push_back({ViolationKind::unknown_knob, name, "not in configuration space"});
      continue;
    }
    auto check = check_strict(*knob, raw);
    if (check.violation) {
      result.violations.push_back(std::move(*check.violation));
    } else {
      values.emplace(name, std::move(*check.value));
    }
  }
  for (const auto& knob : space.knobs()) {
    if (!candidate.contains(knob.name)) {
      result.violations.push_back({ViolationKind::missing_knob, knob.name, "no value given"});
    }
  }
  if (result.violations.empty()) result.config = Configuration(std::move(values));
  return result;
}

CoercionResult coerce_configuration(const ConfigurationSpace& space,
                                    const nlohmann::json& candidate, CoercionPolicy policy,
                                    const Configuration* fill) {
  if (policy == CoercionPolicy::reject) return validate_configuration(space, candidate);

  CoercionResult result;
  if (!candidate.is_object()) {
    result.violations.push_back({ViolationKind::type_mismatch, "", "candidate is not a JSON object"});
    return result;
  }
  const Configuration defaults = space.defaults();
  const Configuration& base = fill != nullptr ? *fill : defaults;
  std::map<std::string, KnobValue> values;
  for (const auto& [name, raw] : candidate.items()) {
    const Knob* knob = space.find(name);
    if (knob == nullptr) {
      result.log.push_back({name, "dropped unknown knob"});
      continue;
    }
    auto check = check_lenient(*knob, raw);
    if (check.violation) {
      result.violations.push_back(std::move(*check.violation));
      continue;
    }
    for (auto& c : check.log) result.log.push_back(std::move(c));
    values.emplace(name, std::move(*check.value));
  }
  for (const auto& knob : space.knobs()) {
    if (values.count(knob.name) != 0) continue;
    const bool from_base = base.contains(knob.name) && value_in_knob(knob, base.at(knob.name));
    values.emplace(knob.name, from_base ? base.at(knob.name) : knob.default_value);
  }
  if (result.violations.empty()) result.config = Configuration(std::move(values));
  return result;
}

bool is_valid(const ConfigurationSpace& space, const Configuration& config) {
  if (config.size() != space.dimension()) return false;
  for (const auto& knob : space.knobs()) {
    if (!config.contains(knob.name) || !value_in_knob(knob, config.at(knob.name))) return false;
  }
  return true;
}

nlohmann::json value_to_json(const Knob& knob, const KnobValue& value) {
  if (const auto* d = std::get_if<double>(&value)) {
    if (knob.type == KnobType::integer) {
      if (*d >= 0 && *d < 18446744073709551616.0) return static_cast<std::uint64_t>(*d);
      if (*d < 0 && *d >= -9223372036854775808.0) return static_cast<std::int64_t>(*d);
    }
    return *d;
  }
  if (const auto* b = std::get_if<bool>(&value)) return *b;
  return std::get<std::string>(value);
}

nlohmann::json to_json(const ConfigurationSpace& space, const Configuration& config) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, value] : config.values()) {
    const Knob* knob = space.find(name);
    if (knob != nullptr) {
      out[name] = value_to_json(*knob, value);
    } else if (const auto* d = std::get_if<double>(&value)) {
      out[name] = *d;
    } else if (const auto* b = std::get_if<bool>(&value)) {
      out[name] = *b;
    } else {
      out[name] = std::get<std::string>(value);
    }
  }
  return out;
}

std::string format_value(const Knob& knob, const KnobValue& value) {
  if (const auto* d = std::get_if<double>(&value)) {
    return knob.type == KnobType::integer ? value_to_json(knob, value).dump() : fmt::format("{}", *d);
  }
  if (const auto* b = std::get_if<bool>(&value)) return *b ? "true" : "false";
  return std::get<std::string>(value);
}

std::vector<double> normalize(const ConfigurationSpace& space, const Configuration& config) {
  if (config.size() != space.dimension()) {
    throw Error(ErrorCode::dimension_mismatch,
                fmt::format("configuration has {} values, space has {} knobs", config.size(),
                            space.dimension()));
  }
  std::vector<double> point;
  point.reserve(space.dimension());
  for (const auto& knob : space.knobs()) {
    const KnobValue& v = config.at(knob.name);
    switch (knob.type) {
      case KnobType::integer:
      case KnobType::real:
        point.push_back((std::get<double>(v) - knob.min) / (knob.max - knob.min));
        break;
      case KnobType::boolean:
        point.push_back(std::get<bool>(v) ? 1.0 : 0.0);
        break;
      case KnobType::enumeration: {
        const auto n = knob.choices.size();
        const auto it = std::find(knob.choices.begin(), knob.choices.end(), std::get<std::string>(v));
        const auto idx = static_cast<double>(it - knob.choices.begin());
        point.push_back(n <= 1 ? 0.0 : idx / static_cast<double>(n - 1));
        break;
      }
    }
  }
  return point;
}

Configuration denormalize(const ConfigurationSpace& space, std::span<const double> point) {
  if (point.size() != space.dimension()) {
    throw Error(ErrorCode::dimension_mismatch,
                fmt::format("point has {} coordinates, space has {} knobs", point.size(),
                            space.dimension()));
  }
  std::map<std::string, KnobValue> values;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const Knob& knob = space.knobs()[i];
    const double x = std::clamp(point[i], 0.0, 1.0);
    switch (knob.type) {
      case KnobType::real:
        values.emplace(knob.name, std::clamp(knob.min + x * (knob.max - knob.min), knob.min, knob.max));
        break;
      case KnobType::integer:
        values.emplace(knob.name, std::clamp(knob.min + std::round(x * (knob.max - knob.min)),
                                             knob.min, knob.max));
        break;
      case KnobType::boolean:
        values.emplace(knob.name, x >= 0.5);
        break;
      case KnobType::enumeration: {
        const auto n = knob.choices.size();
        const auto idx = n <= 1 ? std::size_t{0}
                                : static_cast<std::size_t>(std::round(x * static_cast<double>(n - 1)));
        values.emplace(knob.name, knob.choices[std::min(idx, n - 1)]);
        break;
      }
    }
  }
  return Configuration(std::move(values));
}

Configuration expand_to(const ConfigurationSpace& full, const Configuration& partial) {
  Configuration out = full.defaults();
  for (const auto& [name, value] : partial.values()) {
    if (full.find(name) != nullptr) out.set(name, value);
  }
  return out;
}

void PrunedSpace::check(std::optional<std::size_t> k) const {
  if (selected.empty()) throw Error(ErrorCode::invalid_space, "pruned space selects no knobs");
  if (k && selected.size() != *k) {
    throw Error(ErrorCode::invalid_space,
                fmt::format("pruned space selects {} knobs, expected {}", selected.size(), *k));
  }
  std::vector<std::string> seen;
  for (const auto& name : selected) {
    const Knob* knob = parent.find(name);
    if (knob == nullptr) {
      throw Error(ErrorCode::invalid_space, fmt::format("selected knob '{}' not in parent", name));
    }
    if (std::find(seen.begin(), seen.end(), name) != seen.end()) {
      throw Error(ErrorCode::invalid_space, fmt::format("knob '{}' selected twice", name));
    }
    seen.push_back(name);
    auto it = narrowed.find(name);
    if (it == narrowed.end()) continue;
    const Narrowing& n = it->second;
    if (knob->is_numeric()) {
      if (!(n.min < n.max) || n.min < knob->min || n.max > knob->max) {
        throw Error(ErrorCode::invalid_space,
                    fmt::format("narrowed range of '{}' is degenerate or not contained", name));
      }
    } else {
      if (n.choices.empty()) {
        throw Error(ErrorCode::invalid_space, fmt::format("narrowed choices of '{}' empty", name));
      }
      for (const auto& c : n.choices) {
        const bool ok = knob->type == KnobType::boolean
                            ? parse_bool(c).has_value()
                            : std::find(knob->choices.begin(), knob->choices.end(), c) !=
                                  knob->choices.end();
        if (!ok) {
          throw Error(ErrorCode::invalid_space,
                      fmt::format("narrowed choice '{}' of '{}' not in parent", c, name));
        }
      }
    }
  }
  for (const auto& [name, n] : narrowed) {
    if (std::find(selected.begin(), selected.end(), name) == selected.end()) {
      throw Error(ErrorCode::invalid_space, fmt::format("range given for unselected knob '{}'", name));
    }
  }
}

ConfigurationSpace apply_pruned(const PrunedSpace& pruned) {
  pruned.check();
  std::vector<Knob> knobs;
  // Parent order is kept so normalization stays stable across prunings.
  for (const auto& knob : pruned.parent.knobs()) {
    if (std::find(pruned.selected.begin(), pruned.selected.end(), knob.name) == pruned.selected.end()) {
      continue;
    }
    Knob k = knob;
    auto it = pruned.narrowed.find(k.name);
    if (it != pruned.narrowed.end()) {
      const Narrowing& n = it->second;
      if (k.is_numeric()) {
        k.min = k.type == KnobType::integer ? std::ceil(n.min) : n.min;
        k.max = k.type == KnobType::integer ? std::floor(n.max) : n.max;
        if (!(k.min < k.max)) {
          // Integer narrowing that collapses after snapping keeps the raw bounds' hull.
          k.min = std::floor(n.min);
          k.max = std::ceil(n.max);
        }
        k.default_value = std::clamp(std::get<double>(k.default_value), k.min, k.max);
      } else if (k.type == KnobType::enumeration) {
        std::vector<std::string> kept;
        for (const auto& c : knob.choices) {
          if (std::find(n.choices.begin(), n.choices.end(), c) != n.choices.end()) kept.push_back(c);
        }
        k.choices = std::move(kept);
        const auto& def = std::get<std::string>(k.default_value);
        if (std::find(k.choices.begin(), k.choices.end(), def) == k.choices.end()) {
          k.default_value = k.choices.front();
        }
      } else if (n.choices.size() == 1) {
        // A boolean narrowed to a single value still keeps both states in its
        // type; only the default moves.
        k.default_value = parse_bool(n.choices.front()).value_or(std::get<bool>(k.default_value));
      }
    }
    knobs.push_back(std::move(k));
  }
  return ConfigurationSpace(std::move(knobs));
}

ConfigurationSpace space_from_json(const nlohmann::json& catalog) {
  if (!catalog.is_array()) throw Error(ErrorCode::invalid_space, "catalog must be a JSON array");
  std::vector<Knob> knobs;
  for (const auto& entry : catalog) {
    if (!entry.is_object()) throw Error(ErrorCode::invalid_space, "catalog entry is not an object");
    Knob k;
    try {
      k.name = entry.at("name").get<std::string>();
      k.type = knob_type_from_string(entry.at("type").get<std::string>());
      k.unit = entry.value("unit", std::string{});
      k.description = entry.value("description", std::string{});
      k.restart_required = entry.value("restart_required", false);
      const auto& def = entry.at("default");
      switch (k.type) {
        case KnobType::integer:
        case KnobType::real:
          k.min = entry.at("min").get<double>();
          k.max = entry.at("max").get<double>();
          k.default_value = def.get<double>();
          break;
        case KnobType::enumeration:
          k.choices = entry.at("choices").get<std::vector<std::string>>();
          k.default_value = def.is_string() ? def.get<std::string>() : def.dump();
          break;
        case KnobType::boolean:
          if (def.is_boolean()) {
            k.default_value = def.get<bool>();
          } else {
            auto b = def.is_string() ? parse_bool(def.get<std::string>()) : std::nullopt;
            if (!b) throw Error(ErrorCode::invalid_space, fmt::format("knob '{}': bad boolean default", k.name));
            k.default_value = *b;
          }
          k.min = 0.0;
          k.max = 1.0;
          break;
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::invalid_space,
                  fmt::format("catalog entry '{}': {}", entry.value("name", std::string{"?"}), e.what()));
    }
    knobs.push_back(std::move(k));
  }
  return ConfigurationSpace(std::move(knobs));
}

nlohmann::json space_to_json(const ConfigurationSpace& space) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& k : space.knobs()) {
    nlohmann::json e;
    e["name"] = k.name;
    e["type"] = std::string(to_string(k.type));
    if (k.is_numeric()) {
      e["min"] = value_to_json(k, k.min);
      e["max"] = value_to_json(k, k.max);
    }
    if (k.type == KnobType::enumeration) e["choices"] = k.choices;
    e["default"] = value_to_json(k, k.default_value);
    e["unit"] = k.unit;
    e["description"] = k.description;
    e["restart_required"] = k.restart_required;
    out.push_back(std::move(e));
  }
  return out;
}

ConfigurationSpace load_catalog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, fmt::format("cannot open catalog '{}'", path.string()));
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::invalid_space, fmt::format("catalog '{}': {}", path.string(), e.what()));
  }
  return space_from_json(doc);
}

nlohmann::json pruned_to_json(const PrunedSpace& pruned) {
  nlohmann::json out;
  out["parent_digest"] = space_digest(pruned.parent);
  out["selected"] = pruned.selected;
  nlohmann::json ranges = nlohmann::json::object();
  for (const auto& [name, n] : pruned.narrowed) {
    const Knob& k = pruned.parent.knob(name);
    if (k.is_numeric()) {
      ranges[name] = {{"min", value_to_json(k, n.min)}, {"max", value_to_json(k, n.max)}};
    } else {
      ranges[name] = {{"choices", n.choices}};
    }
  }
  out["ranges"] = std::move(ranges);
  return out;
}

PrunedSpace pruned_from_json(const ConfigurationSpace& parent, const nlohmann::json& doc) {
  PrunedSpace pruned;
  pruned.parent = parent;
  try {
    if (doc.contains("parent_digest") && doc.at("parent_digest").get<std::string>() != space_digest(parent)) {
      throw Error(ErrorCode::invalid_space, "pruned space was built from a different catalog");
    }
    pruned.selected = doc.at("selected").get<std::vector<std::string>>();
    if (doc.contains("ranges")) {
      for (const auto& [name, r] : doc.at("ranges").items()) {
        Narrowing n;
        if (r.contains("choices")) {
          n.choices = r.at("choices").get<std::vector<std::string>>();
        } else {
          n.min = r.at("min").get<double>();
          n.max = r.at("max").get<double>();
        }
        pruned.narrowed.emplace(name, std::move(n));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_space, fmt::format("pruned space: {}", e.what()));
  }
  pruned.check();
  return pruned;
}

std::string space_digest(const ConfigurationSpace& space) {
  const std::string text = space_to_json(space).dump();
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return fmt::format("{:016x}", hash);
}

}  // namespace knobforge
