// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "knobforge/knobspace.hpp"

namespace knobforge {

// n points in [0,1]^dim; along every dimension the n coordinates fall into
// the n strata [j/n, (j+1)/n) exactly once.
std::vector<std::vector<double>> lhs_points(std::size_t dim, std::size_t n, std::mt19937_64& rng);

std::vector<Configuration> lhs_sample(const ConfigurationSpace& space, std::size_t n, std::uint64_t seed);

// Uniform draw from the unit hypercube, denormalized.
Configuration random_configuration(const ConfigurationSpace& space, std::mt19937_64& rng);

}  // namespace knobforge
