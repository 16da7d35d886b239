// Copyright 2026 The knobforge Authors.
// SPDX-License-Identifier: Apache-2.0

#include "knobforge/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "knobforge/error.hpp"

namespace knobforge {

namespace {

constexpr double kMaxJitter = 1e-4;

// Box constraints on the log hyperparameters; inputs live in [0,1]^d and
// outputs are standardized, so these are wide.
const double kLogLengthMin = std::log(0.02);
const double kLogLengthMax = std::log(20.0);
const double kLogSignalMin = std::log(0.01);
const double kLogSignalMax = std::log(100.0);
const double kLogNoiseMin = std::log(1e-6);
const double kLogNoiseMax = std::log(1.0);

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const GpHyper& h) {
  const Eigen::Index n = x.rows();
  const Eigen::ArrayXd inv_l2 = (-2.0 * h.log_lengthscales.array()).exp();
  const double sf2 = std::exp(h.log_signal_variance);
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = sf2;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double r2 = ((x.row(i) - x.row(j)).array().square() * inv_l2.transpose()).sum();
      k(i, j) = k(j, i) = sf2 * std::exp(-0.5 * r2);
    }
  }
  return k;
}

bool factor(Eigen::MatrixXd k, double diag, Eigen::LLT<Eigen::MatrixXd>& llt) {
  k.diagonal().array() += diag;
  llt.compute(k);
  if (llt.info() != Eigen::Success) return false;
  const auto d = llt.matrixL().toDenseMatrix().diagonal();
  return (d.array() > 0.0).all() && d.allFinite();
}

Eigen::VectorXd clamp_theta(Eigen::VectorXd theta) {
  const Eigen::Index d = theta.size() - 2;
  for (Eigen::Index i = 0; i < d; ++i) theta(i) = std::clamp(theta(i), kLogLengthMin, kLogLengthMax);
  theta(d) = std::clamp(theta(d), kLogSignalMin, kLogSignalMax);
  theta(d + 1) = std::clamp(theta(d + 1), kLogNoiseMin, kLogNoiseMax);
  return theta;
}

}  // namespace

Eigen::VectorXd GpHyper::pack() const {
  Eigen::VectorXd theta(log_lengthscales.size() + 2);
  theta.head(log_lengthscales.size()) = log_lengthscales;
  theta(log_lengthscales.size()) = log_signal_variance;
  theta(log_lengthscales.size() + 1) = log_noise_variance;
  return theta;
}

GpHyper GpHyper::unpack(const Eigen::VectorXd& theta, Eigen::Index dim) {
  GpHyper h;
  h.log_lengthscales = theta.head(dim);
  h.log_signal_variance = theta(dim);
  h.log_noise_variance = theta(dim + 1);
  return h;
}

double gp_log_marginal_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpHyper& hyper,
                                  Eigen::VectorXd* gradient) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::MatrixXd kf = kernel_matrix(x, hyper);
  const double sn2 = std::exp(hyper.log_noise_variance);
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (!factor(kf, sn2, llt)) return -std::numeric_limits<double>::infinity();

  const Eigen::VectorXd alpha = llt.solve(y);
  const Eigen::MatrixXd l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  const double lml = -0.5 * y.dot(alpha) - 0.5 * log_det -
                     0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  if (gradient != nullptr) {
    // d LML / d theta_j = 0.5 tr((alpha alpha^T - K^{-1}) dK/dtheta_j)
    const Eigen::MatrixXd w = alpha * alpha.transpose() - llt.solve(Eigen::MatrixXd::Identity(n, n));
    gradient->resize(d + 2);
    const Eigen::ArrayXd inv_l2 = (-2.0 * hyper.log_lengthscales.array()).exp();
    for (Eigen::Index k = 0; k < d; ++k) {
      double g = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
          const double diff = x(i, k) - x(j, k);
          g += 2.0 * w(i, j) * kf(i, j) * diff * diff * inv_l2(k);
        }
      }
      (*gradient)(k) = 0.5 * g;
    }
    (*gradient)(d) = 0.5 * (w.array() * kf.array()).sum();
    (*gradient)(d + 1) = 0.5 * sn2 * w.trace();
  }
  return lml;
}

GPModel GPModel::with_hyper(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpHyper& hyper) {
  if (x.rows() < 1 || x.rows() != y.size()) {
    throw Error(ErrorCode::invalid_argument, "GP needs matching non-empty inputs and outputs");
  }
  GPModel m;
  m.x_ = x;
  m.mean_ = y.mean();
  const double var = y.size() > 1 ? (y.array() - m.mean_).square().sum() / static_cast<double>(y.size()) : 0.0;
  m.scale_ = var > 1e-24 ? std::sqrt(var) : 1.0;
  m.y_std_ = (y.array() - m.mean_) / m.scale_;
  m.hyper_ = hyper;
  m.factorize();
  return m;
}

GPModel GPModel::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpFitOptions& options) {
  if (x.rows() < 1 || x.rows() != y.size()) {
    throw Error(ErrorCode::invalid_argument, "GP needs matching non-empty inputs and outputs");
  }
  const Eigen::Index d = x.cols();
  GPModel probe = with_hyper(x, y, GpHyper{Eigen::VectorXd::Constant(d, std::log(0.5)), 0.0, std::log(1e-3)});
  const Eigen::VectorXd& ys = probe.y_std_;

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd best_theta = probe.hyper_.pack();
  double best_lml = -std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < std::max(1, options.restarts); ++restart) {
    Eigen::VectorXd theta(d + 2);
    if (restart == 0) {
      theta = options.initial != nullptr && options.initial->log_lengthscales.size() == d
                  ? options.initial->pack()
                  : probe.hyper_.pack();
    } else {
      for (Eigen::Index i = 0; i < d; ++i) theta(i) = std::log(0.05) + unit(rng) * (std::log(5.0) - std::log(0.05));
      theta(d) = std::log(0.3) + unit(rng) * (std::log(3.0) - std::log(0.3));
      theta(d + 1) = std::log(1e-6) + unit(rng) * (std::log(1e-1) - std::log(1e-6));
    }
    theta = clamp_theta(theta);
    Eigen::VectorXd grad;
    double f = gp_log_marginal_likelihood(x, ys, GpHyper::unpack(theta, d), &grad);
    if (!std::isfinite(f)) continue;
    double step = 0.2;
    for (int it = 0; it < options.max_steps && step > 1e-5; ++it) {
      const double gmax = std::max(1.0, grad.cwiseAbs().maxCoeff());
      const Eigen::VectorXd next = clamp_theta(theta + (step / gmax) * grad);
      Eigen::VectorXd next_grad;
      const double fn = gp_log_marginal_likelihood(x, ys, GpHyper::unpack(next, d), &next_grad);
      if (std::isfinite(fn) && fn > f) {
        const bool stalled = fn - f < 1e-9;
        theta = next;
        f = fn;
        grad = next_grad;
        step *= 1.5;
        if (stalled) break;
      } else {
        step *= 0.5;
      }
    }
    if (f > best_lml) {
      best_lml = f;
      best_theta = theta;
    }
  }
  return with_hyper(x, y, GpHyper::unpack(best_theta, d));
}

void GPModel::factorize() {
  const Eigen::MatrixXd kf = kernel_matrix(x_, hyper_);
  const double sn2 = std::exp(hyper_.log_noise_variance);
  for (double jitter = 0.0; jitter <= kMaxJitter * 1.0001; jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0) {
    if (factor(kf, sn2 + jitter, llt_)) {
      jitter_ = jitter;
      alpha_ = llt_.solve(y_std_);
      return;
    }
  }
  throw Error(ErrorCode::fit_failed,
              fmt::format("GP kernel matrix not positive definite with jitter up to {}", kMaxJitter));
}

std::pair<double, double> GPModel::predict(const Eigen::VectorXd& point) const {
  const Eigen::Index n = x_.rows();
  const Eigen::ArrayXd inv_l2 = (-2.0 * hyper_.log_lengthscales.array()).exp();
  const double sf2 = signal_variance();
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r2 = ((x_.row(i).transpose() - point).array().square() * inv_l2).sum();
    ks(i) = sf2 * std::exp(-0.5 * r2);
  }
  const double mean = ks.dot(alpha_);
  const Eigen::VectorXd v = llt_.matrixL().solve(ks);
  const double var = std::max(0.0, sf2 - v.squaredNorm());
  return {mean_ + scale_ * mean, scale_ * scale_ * var};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> GPModel::predict_many(const Eigen::MatrixXd& points) const {
  const Eigen::Index n = x_.rows();
  const Eigen::Index m = points.rows();
  const Eigen::ArrayXd inv_l = (-hyper_.log_lengthscales.array()).exp();
  const double sf2 = signal_variance();
  const Eigen::MatrixXd xs = x_.array().rowwise() * inv_l.transpose();
  const Eigen::MatrixXd ps = points.array().rowwise() * inv_l.transpose();
  Eigen::MatrixXd ks(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    ks.col(j) = sf2 * (-0.5 * (xs.rowwise() - ps.row(j)).rowwise().squaredNorm().array()).exp();
  }
  Eigen::VectorXd mean = (ks.transpose() * alpha_).array() * scale_ + mean_;
  const Eigen::MatrixXd v = llt_.matrixL().solve(ks);
  Eigen::VectorXd var = ((sf2 - v.colwise().squaredNorm().array()).max(0.0) * scale_ * scale_).matrix().transpose();
  return {std::move(mean), std::move(var)};
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double expected_improvement(double mean, double variance, double incumbent_best, bool maximize) {
  const double improvement = maximize ? mean - incumbent_best : incumbent_best - mean;
  if (!(variance > 0.0)) return std::max(0.0, improvement);
  const double sd = std::sqrt(variance);
  const double z = improvement / sd;
  return std::max(0.0, improvement * normal_cdf(z) + sd * normal_pdf(z));
}

}  // namespace knobforge
