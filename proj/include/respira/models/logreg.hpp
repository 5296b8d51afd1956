#pragma once

// Multinomial logistic regression trained by full-batch gradient descent.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "respira/error.hpp"
#include "respira/matrix.hpp"
#include "respira/models/prediction.hpp"
#include "respira/models/tree.hpp"

namespace respira {

struct LogregParams {
  double learning_rate = 0.1;
  double l2_lambda = 1e-4;
  int max_iters = 1000;
  double loss_tol = 1e-6;

  friend bool operator==(const LogregParams&, const LogregParams&) = default;
};

/// weights is n_classes x (d + 1); the last column holds the bias.
struct LogisticModel {
  Matrix weights;
  bool converged = false;
  double final_loss = 0.0;
  int iterations = 0;

  std::size_t feature_count() const noexcept { return weights.cols() == 0 ? 0 : weights.cols() - 1; }
  int n_classes() const noexcept { return static_cast<int>(weights.rows()); }
  friend bool operator==(const LogisticModel&, const LogisticModel&) = default;
};

/// Max-shifted softmax; finite for any finite input.
inline std::vector<double> softmax(std::span<const double> z) {
  if (z.empty()) return {};
  const double top = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    p[k] = std::exp(z[k] - top);
    sum += p[k];
  }
  for (auto& v : p) v /= sum;
  return p;
}

struct LossAndGradient {
  double loss = 0.0;
  Matrix gradient;  // same shape as the weights
};

namespace detail {

/// y += a * x.
inline void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

/// Eight independent partial sums (vectorizable without reassociation),
/// combined pairwise.
inline double dot(const double* a, const double* b, std::size_t n) {
  double acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  }
  for (; i < n; ++i) acc[0] += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

/// Keeps a feature-major copy of X; every pass walks one feature column
/// against all class rows so the working set stays cache-resident.
class LogregObjective {
 public:
  static constexpr std::size_t kBlock = 8;
  static constexpr std::size_t kLogBlock = 32;

  LogregObjective(const Matrix& x, std::span<const int> y, int n_classes, double lambda)
      : n_(x.rows()), d_(x.cols()), k_(static_cast<std::size_t>(n_classes)), lambda_(lambda), y_(y),
        xt_(d_ * n_), z_(k_ * n_) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < d_; ++j) xt_[j * n_ + i] = x(i, j);
    }
  }

  /// Mean cross-entropy + (lambda/2)||W||^2 over non-bias weights.
  LossAndGradient evaluate(const Matrix& w) {
    const double inv_n = 1.0 / static_cast<double>(n_);
    // Logits, kBlock samples at a time with accumulators held in registers.
    std::size_t i0 = 0;
    for (; i0 + kBlock <= n_; i0 += kBlock) {
      for (std::size_t k = 0; k < k_; ++k) {
        double acc[kBlock];
        std::fill_n(acc, kBlock, w(k, d_));
        for (std::size_t j = 0; j < d_; ++j) {
          const double wkj = w(k, j);
          const double* xj = &xt_[j * n_ + i0];
          for (std::size_t l = 0; l < kBlock; ++l) acc[l] += wkj * xj[l];
        }
        std::copy_n(acc, kBlock, &z_[k * n_ + i0]);
      }
    }
    for (std::size_t i = i0; i < n_; ++i) {
      for (std::size_t k = 0; k < k_; ++k) {
        double acc = w(k, d_);
        for (std::size_t j = 0; j < d_; ++j) acc += w(k, j) * xt_[j * n_ + i];
        z_[k * n_ + i] = acc;
      }
    }

    // z_ becomes the residual softmax(z) - onehot(y) in place.
    // Each partition sum lies in [1, K], so products of kLogBlock of them
    // stay finite and one log per block replaces one log per sample.
    double data_loss = 0.0;
    double partition_product = 1.0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (i % kLogBlock == 0) {
        data_loss += std::log(partition_product);
        partition_product = 1.0;
      }
      std::size_t arg_top = 0;
      for (std::size_t k = 1; k < k_; ++k) {
        if (z_[k * n_ + i] > z_[arg_top * n_ + i]) arg_top = k;
      }
      const double top = z_[arg_top * n_ + i];
      const auto yi = static_cast<std::size_t>(y_[i]);
      data_loss -= z_[yi * n_ + i] - top;
      double sum = 0.0;
      for (std::size_t k = 0; k < k_; ++k) {
        double& v = z_[k * n_ + i];
        v = k == arg_top ? 1.0 : std::exp(v - top);  // exp(0) == 1 exactly
        sum += v;
      }
      partition_product *= sum;
      const double inv_sum = 1.0 / sum;
      for (std::size_t k = 0; k < k_; ++k) z_[k * n_ + i] *= inv_sum;
      z_[yi * n_ + i] -= 1.0;
    }
    data_loss += std::log(partition_product);

    LossAndGradient out{data_loss * inv_n, Matrix(k_, d_ + 1)};
    double penalty = 0.0;
    for (std::size_t j = 0; j < d_; ++j) {
      const double* xj = &xt_[j * n_];
      for (std::size_t k = 0; k < k_; ++k) {
        const double wkj = w(k, j);
        out.gradient(k, j) = dot(&z_[k * n_], xj, n_) * inv_n + lambda_ * wkj;
        penalty += wkj * wkj;
      }
    }
    for (std::size_t k = 0; k < k_; ++k) {
      const double* rk = &z_[k * n_];
      double bias = 0.0;
      for (std::size_t i = 0; i < n_; ++i) bias += rk[i];
      out.gradient(k, d_) = bias * inv_n;
    }
    out.loss += 0.5 * lambda_ * penalty;
    return out;
  }

 private:
  std::size_t n_, d_, k_;
  double lambda_;
  std::span<const int> y_;
  std::vector<double> xt_;
  std::vector<double> z_;
};

}  // namespace detail

/// Regularized cross-entropy and its analytic gradient at `weights`.
inline LossAndGradient logreg_loss_and_gradient(const Matrix& weights, const Matrix& x, std::span<const int> y,
                                                double l2_lambda) {
  const int n_classes = static_cast<int>(weights.rows());
  if (weights.cols() != x.cols() + 1) fail(ErrorKind::DimensionMismatch, "weights must be n_classes x (d+1)");
  check_labels(x, y, n_classes);
  return detail::LogregObjective(x, y, n_classes, l2_lambda).evaluate(weights);
}

/// Expects standardized features. Starts from zero weights and stops at
/// max_iters or when the loss changes by less than loss_tol.
inline LogisticModel train_logreg(const Matrix& x, std::span<const int> y, const LogregParams& params,
                                  int n_classes) {
  if (!(params.learning_rate > 0.0) || !(params.loss_tol > 0.0) || params.max_iters < 1 ||
      !(params.l2_lambda >= 0.0)) {
    fail(ErrorKind::InvalidParams, "logistic regression hyperparameters out of range");
  }
  if (x.rows() == 0) fail(ErrorKind::EmptyMatrix, "no training rows");
  check_labels(x, y, n_classes);

  detail::LogregObjective objective(x, y, n_classes, params.l2_lambda);
  LogisticModel model;
  model.weights = Matrix(static_cast<std::size_t>(n_classes), x.cols() + 1, 0.0);
  double previous = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < params.max_iters; ++iter) {
    auto eval = objective.evaluate(model.weights);
    if (!std::isfinite(eval.loss)) {
      fail(ErrorKind::NonFiniteLoss, "loss diverged at iteration " + std::to_string(iter));
    }
    model.final_loss = eval.loss;
    model.iterations = iter;
    if (std::abs(previous - eval.loss) < params.loss_tol) {
      model.converged = true;
      return model;
    }
    previous = eval.loss;
    for (std::size_t k = 0; k < model.weights.rows(); ++k) {
      for (std::size_t j = 0; j < model.weights.cols(); ++j) {
        model.weights(k, j) -= params.learning_rate * eval.gradient(k, j);
      }
    }
  }
  const auto last = objective.evaluate(model.weights);
  if (!std::isfinite(last.loss)) fail(ErrorKind::NonFiniteLoss, "loss diverged");
  model.converged = std::abs(previous - last.loss) < params.loss_tol;
  model.final_loss = last.loss;
  model.iterations = params.max_iters;
  return model;
}

inline Prediction predict_logreg(const LogisticModel& model, std::span<const double> x) {
  const std::size_t d = model.feature_count();
  if (x.size() != d) fail(ErrorKind::DimensionMismatch, "logistic model expects " + std::to_string(d) + " features");
  std::vector<double> z(model.weights.rows());
  for (std::size_t k = 0; k < z.size(); ++k) {
    auto w = model.weights.row(k);
    z[k] = detail::dot(w.data(), x.data(), d) + w[d];
  }
  Prediction p;
  p.scores = softmax(z);
  p.label = argmax_lowest(p.scores);
  return p;
}

}  // namespace respira
