// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

// Shared spaces and surfaces for the unit tests.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "knobforge/knobspace.hpp"
#include "knobforge/target.hpp"

namespace knobforge::testing {

inline Knob int_knob(std::string name, double lo, double hi, double def) {
  Knob k;
  k.name = std::move(name);
  k.type = KnobType::integer;
  k.min = lo;
  k.max = hi;
  k.default_value = def;
  return k;
}

inline Knob real_knob(std::string name, double lo, double hi, double def) {
  Knob k = int_knob(std::move(name), lo, hi, def);
  k.type = KnobType::real;
  return k;
}

inline Knob enum_knob(std::string name, std::vector<std::string> choices, std::string def) {
  Knob k;
  k.name = std::move(name);
  k.type = KnobType::enumeration;
  k.choices = std::move(choices);
  k.default_value = std::move(def);
  return k;
}

inline Knob bool_knob(std::string name, bool def) {
  Knob k;
  k.name = std::move(name);
  k.type = KnobType::boolean;
  k.default_value = def;
  return k;
}

// A mixed space: integers, a real, an enumeration and a boolean.
inline ConfigurationSpace mixed_space() {
  return ConfigurationSpace({int_knob("buffer_pool", 0, 100, 10), int_knob("io_capacity", 100, 20000, 200),
                             real_knob("dirty_pct", 0.0, 99.0, 90.0),
                             enum_knob("flush_method", {"fsync", "O_DSYNC", "O_DIRECT"}, "fsync"),
                             bool_knob("adaptive_hash", true), int_knob("delay_us", 0, 4294967295.0, 0)});
}

// n integer knobs "k00".."k<n-1>" on [0, 20] with default 2. Normalized
// positions that are multiples of 0.05 are exactly reachable.
inline ConfigurationSpace grid_space(std::size_t n, double hi = 20.0) {
  std::vector<Knob> knobs;
  for (std::size_t i = 0; i < n; ++i) knobs.push_back(int_knob(fmt::format("k{:02}", i), 0, hi, 2));
  return ConfigurationSpace(std::move(knobs));
}

// Three planted quadratic knobs on a grid space, noise free.
inline SynthSurfaceSpec planted_surface(std::uint64_t seed = 1) {
  SynthSurfaceSpec s;
  s.seed = seed;
  s.base_objective = 100.0;
  s.important_knobs = {{"k00", 60.0, 0.7, ResponseShape::quadratic},
                       {"k03", 40.0, 0.35, ResponseShape::quadratic},
                       {"k07", 30.0, 0.8, ResponseShape::quadratic}};
  return s;
}

// Published top-10 MySQL knob selections: a database expert, GPT-4o and SHAP.
inline std::vector<std::string> expert_selection() {
  return {"innodb_buffer_pool_size", "tmp_table_size", "max_heap_table_size", "innodb_log_file_size",
          "innodb_flush_log_at_trx_commit", "query_cache_size", "table_open_cache", "sort_buffer_size",
          "max_connections", "key_buffer_size"};
}

inline std::vector<std::string> gpt4o_selection() {
  return {"innodb_buffer_pool_size", "tmp_table_size", "max_heap_table_size", "innodb_log_file_size",
          "innodb_flush_log_at_trx_commit", "query_cache_size", "table_open_cache", "innodb_io_capacity",
          "join_buffer_size", "thread_cache_size"};
}

inline std::vector<std::string> shap_selection() {
  return {"innodb_buffer_pool_size", "tmp_table_size", "max_heap_table_size",
          "innodb_compression_failure_threshold_pct", "query_prealloc_size", "innodb_thread_concurrency",
          "table_open_cache_instances", "sort_buffer_size", "innodb_max_dirty_pages_pct_lwm",
          "innodb_purge_threads"};
}

// Scratch directory removed at scope exit.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "knobforge-test-XXXXXX").string();
    path_ = mkdtemp(tmpl.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path write(const std::string& name, const std::string& text) const {
    const auto p = path_ / name;
    std::ofstream(p) << text;
    return p;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace knobforge::testing
