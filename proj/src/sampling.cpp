// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#include "knobforge/sampling.hpp"

#include <algorithm>
#include <numeric>

#include "knobforge/error.hpp"

namespace knobforge {

std::vector<std::vector<double>> lhs_points(std::size_t dim, std::size_t n, std::mt19937_64& rng) {
  if (n == 0) throw Error(ErrorCode::invalid_argument, "LHS needs n >= 1");
  // Offsets stay away from the stratum edges so a denormalize/normalize round
  // trip cannot push a coordinate into the neighbouring stratum.
  std::uniform_real_distribution<double> offset(1e-6, 1.0 - 1e-6);
  std::vector<std::vector<double>> points(n, std::vector<double>(dim));
  std::vector<std::size_t> strata(n);
  const double width = 1.0 / static_cast<double>(n);
  for (std::size_t d = 0; d < dim; ++d) {
    std::iota(strata.begin(), strata.end(), std::size_t{0});
    std::shuffle(strata.begin(), strata.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      points[i][d] = (static_cast<double>(strata[i]) + offset(rng)) * width;
    }
  }
  return points;
}

std::vector<Configuration> lhs_sample(const ConfigurationSpace& space, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto points = lhs_points(space.dimension(), n, rng);
  std::vector<Configuration> out;
  out.reserve(n);
  for (const auto& p : points) out.push_back(denormalize(space, p));
  return out;
}

Configuration random_configuration(const ConfigurationSpace& space, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> p(space.dimension());
  for (auto& x : p) x = unit(rng);
  return denormalize(space, p);
}

}  // namespace knobforge
