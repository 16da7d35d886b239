// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

// Random-forest regression surrogate: bootstrapped CART trees with feature
// subsampling. Predictive mean and variance are taken across trees.

#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace knobforge {

struct ForestOptions {
  int trees_count = 10;
  int min_leaf = 3;
  double feature_subsample = 5.0 / 6.0;
  int max_depth = 20;
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    int count = 0;
  };

  static RegressionTree build(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              std::vector<int> rows, const ForestOptions& options, std::mt19937_64& rng);

  double predict(const double* point) const;
  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  int grow(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<int>& rows, int begin, int end,
           int depth, const ForestOptions& options, std::mt19937_64& rng);

  std::vector<Node> nodes_;
};

class ForestModel {
 public:
  // Rows of `x` are points. Throws Error{insufficient_data} on empty input.
  static ForestModel fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestOptions& options = {});

  // Across-tree mean and (population) variance.
  std::pair<double, double> predict(const Eigen::VectorXd& point) const;
  double predict_mean(const double* point) const;

  const std::vector<RegressionTree>& trees() const { return trees_; }
  const ForestOptions& options() const { return options_; }

 private:
  std::vector<RegressionTree> trees_;
  ForestOptions options_;
};

}  // namespace knobforge
