// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

// Gaussian-process regression with a squared-exponential ARD kernel, and the
// expected-improvement acquisition.

#pragma once

#include <cstdint>
#include <utility>

#include <Eigen/Dense>

namespace knobforge {

// Hyperparameters in log space: [log l_1 .. log l_d, log signal_var, log noise_var].
struct GpHyper {
  Eigen::VectorXd log_lengthscales;
  double log_signal_variance = 0.0;
  double log_noise_variance = -6.0;

  Eigen::VectorXd pack() const;
  static GpHyper unpack(const Eigen::VectorXd& theta, Eigen::Index dim);
};

// Log marginal likelihood of standardized targets `y` at inputs `x` (rows are
// points). Writes d(LML)/d(theta) into `gradient` when non-null. Returns -inf
// when the kernel matrix cannot be factorized.
double gp_log_marginal_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpHyper& hyper,
                                  Eigen::VectorXd* gradient = nullptr);

struct GpFitOptions {
  int restarts = 3;
  int max_steps = 60;
  std::uint64_t seed = 0;
  // Warm start for the first restart; ignored when its dimension differs.
  const GpHyper* initial = nullptr;
};

class GPModel {
 public:
  // Throws Error{fit_failed} if Cholesky fails even with jitter up to 1e-4.
  static GPModel fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpFitOptions& options = {});
  // Fixed hyperparameters, no optimization.
  static GPModel with_hyper(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpHyper& hyper);

  // Posterior mean and latent-function variance in the original output units.
  std::pair<double, double> predict(const Eigen::VectorXd& point) const;
  // Row-wise predict() for many points at once.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> predict_many(const Eigen::MatrixXd& points) const;

  const Eigen::MatrixXd& inputs() const { return x_; }
  const Eigen::VectorXd& outputs() const { return y_std_; }
  const GpHyper& hyper() const { return hyper_; }
  Eigen::VectorXd lengthscales() const { return hyper_.log_lengthscales.array().exp(); }
  double signal_variance() const { return std::exp(hyper_.log_signal_variance); }
  double noise_variance() const { return std::exp(hyper_.log_noise_variance); }
  double output_mean() const { return mean_; }
  double output_scale() const { return scale_; }
  double jitter() const { return jitter_; }

 private:
  void factorize();

  Eigen::MatrixXd x_;
  Eigen::VectorXd y_std_;
  double mean_ = 0.0;
  double scale_ = 1.0;
  GpHyper hyper_;
  double jitter_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
};

// Closed-form EI against `incumbent_best`; zero when variance is zero and the
// mean does not improve on the incumbent.
double expected_improvement(double mean, double variance, double incumbent_best, bool maximize);

double normal_pdf(double z);
double normal_cdf(double z);

}  // namespace knobforge
