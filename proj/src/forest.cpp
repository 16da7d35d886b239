// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#include "knobforge/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "knobforge/error.hpp"

namespace knobforge {

RegressionTree RegressionTree::build(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<int> rows,
                                     const ForestOptions& options, std::mt19937_64& rng) {
  RegressionTree tree;
  tree.grow(x, y, rows, 0, static_cast<int>(rows.size()), 0, options, rng);
  return tree;
}

int RegressionTree::grow(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<int>& rows, int begin,
                         int end, int depth, const ForestOptions& options, std::mt19937_64& rng) {
  const int n = end - begin;
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  double sum = 0.0;
  double sq = 0.0;
  for (int i = begin; i < end; ++i) {
    sum += y(rows[i]);
    sq += y(rows[i]) * y(rows[i]);
  }
  nodes_[id].value = sum / n;
  nodes_[id].count = n;
  const double sse = sq - sum * sum / n;
  const int min_leaf = std::max(1, options.min_leaf);
  if (depth >= options.max_depth || n < 2 * min_leaf || sse <= 1e-12 * std::max(1.0, sq)) return id;

  const int d = static_cast<int>(x.cols());
  std::vector<int> features(d);
  std::iota(features.begin(), features.end(), 0);
  std::shuffle(features.begin(), features.end(), rng);
  const int m = std::clamp(static_cast<int>(std::ceil(options.feature_subsample * d)), 1, d);

  int best_feature = -1;
  double best_threshold = 0.0;
  double best_score = sum * sum / n + 1e-12 * std::max(1.0, sse);
  std::vector<std::pair<double, double>> column(n);
  for (int f = 0; f < m; ++f) {
    const int feature = features[f];
    for (int i = 0; i < n; ++i) column[i] = {x(rows[begin + i], feature), y(rows[begin + i])};
    std::sort(column.begin(), column.end());
    double left_sum = 0.0;
    for (int i = 0; i < n - min_leaf; ++i) {
      left_sum += column[i].second;
      const int nl = i + 1;
      if (nl < min_leaf || column[i].first == column[i + 1].first) continue;
      const double right_sum = sum - left_sum;
      const double score = left_sum * left_sum / nl + right_sum * right_sum / (n - nl);
      if (score > best_score) {
        best_score = score;
        best_feature = feature;
        best_threshold = 0.5 * (column[i].first + column[i + 1].first);
      }
    }
  }
  if (best_feature < 0) return id;

  const auto mid = std::partition(rows.begin() + begin, rows.begin() + end,
                                  [&](int r) { return x(r, best_feature) <= best_threshold; });
  const int split = static_cast<int>(mid - rows.begin());
  nodes_[id].feature = best_feature;
  nodes_[id].threshold = best_threshold;
  const int left = grow(x, y, rows, begin, split, depth + 1, options, rng);
  nodes_[id].left = left;
  const int right = grow(x, y, rows, split, end, depth + 1, options, rng);
  nodes_[id].right = right;
  return id;
}

double RegressionTree::predict(const double* point) const {
  int i = 0;
  while (nodes_[i].feature >= 0) {
    i = point[nodes_[i].feature] <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
  }
  return nodes_[i].value;
}

ForestModel ForestModel::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestOptions& options) {
  if (x.rows() < 1 || x.rows() != y.size()) {
    throw Error(ErrorCode::insufficient_data, "forest needs matching non-empty inputs and outputs");
  }
  if (options.trees_count < 1 || options.min_leaf < 1 || !(options.feature_subsample > 0.0) ||
      options.feature_subsample > 1.0) {
    throw Error(ErrorCode::invalid_argument, "invalid forest options");
  }
  ForestModel model;
  model.options_ = options;
  std::mt19937_64 rng(options.seed);
  const int n = static_cast<int>(x.rows());
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int t = 0; t < options.trees_count; ++t) {
    std::vector<int> rows(n);
    if (options.bootstrap) {
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    model.trees_.push_back(RegressionTree::build(x, y, std::move(rows), options, rng));
  }
  return model;
}

std::pair<double, double> ForestModel::predict(const Eigen::VectorXd& point) const {
  double sum = 0.0;
  double sq = 0.0;
  for (const auto& t : trees_) {
    const double v = t.predict(point.data());
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(trees_.size());
  const double mean = sum / n;
  return {mean, std::max(0.0, sq / n - mean * mean)};
}

double ForestModel::predict_mean(const double* point) const {
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict(point);
  return sum / static_cast<double>(trees_.size());
}

}  // namespace knobforge
