#pragma once

// RBF-kernel support vector machine: simplified SMO for the binary dual and a
// one-vs-rest wrapper for multiclass problems.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "respira/error.hpp"
#include "respira/matrix.hpp"
#include "respira/models/prediction.hpp"
#include "respira/models/tree.hpp"
#include "respira/parallel.hpp"
#include "respira/random.hpp"

namespace respira {

inline double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma) {
  if (x.size() != z.size()) fail(ErrorKind::DimensionMismatch, "kernel arguments differ in dimension");
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - z[i];
    sq += d * d;
  }
  return std::exp(-gamma * sq);
}

struct SvmParams {
  double c = 1.0;
  /// nullopt is the "scale" rule: 1 / (d * mean per-feature variance).
  std::optional<double> gamma;
  double smo_tol = 1e-3;
  int max_passes = 10;
  /// Hard cap on sweeps over the data; hitting it is reported, not raised.
  int max_sweeps = 2000;
  std::uint64_t seed = 0;

  friend bool operator==(const SvmParams&, const SvmParams&) = default;
};

inline double resolve_gamma(const std::optional<double>& gamma, const Matrix& x) {
  if (gamma) {
    if (!(*gamma > 0.0)) fail(ErrorKind::InvalidParams, "gamma must be positive");
    return *gamma;
  }
  const std::size_t n = x.rows(), d = x.cols();
  if (d == 0) fail(ErrorKind::EmptyMatrix, "no features");
  double mean_var = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
    mean_var += var / static_cast<double>(n);
  }
  mean_var /= static_cast<double>(d);
  if (mean_var < 1e-12) return 1.0 / static_cast<double>(d);
  return 1.0 / (static_cast<double>(d) * mean_var);
}

struct BinarySvm {
  Matrix support_vectors;
  std::vector<double> dual_coef;  // alpha_i * y_i for each support vector
  double bias = 0.0;
  double gamma = 1.0;
  /// Training diagnostics; alphas cover every training row.
  std::vector<double> alphas;
  int sweeps = 0;
  bool converged = false;

  friend bool operator==(const BinarySvm&, const BinarySvm&) = default;
};

inline double svm_decision(const BinarySvm& svm, std::span<const double> x) {
  if (x.size() != svm.support_vectors.cols()) fail(ErrorKind::DimensionMismatch, "svm input dimension");
  double f = svm.bias;
  for (std::size_t i = 0; i < svm.dual_coef.size(); ++i) {
    f += svm.dual_coef[i] * rbf_kernel(svm.support_vectors.row(i), x, svm.gamma);
  }
  return f;
}

/// Simplified SMO: sweep the rows, and for each KKT violator pair it with a
/// uniformly random partner drawn from a generator seeded by params.seed.
/// Stops after max_passes consecutive sweeps without an update.
inline BinarySvm smo_train_binary(const Matrix& x, std::span<const int> y, const SvmParams& params) {
  const std::size_t n = x.rows();
  if (y.size() != n) fail(ErrorKind::DimensionMismatch, "labels do not match rows");
  if (!(params.c > 0.0) || !(params.smo_tol > 0.0) || params.max_passes < 1 || params.max_sweeps < 1) {
    fail(ErrorKind::InvalidParams, "svm hyperparameters out of range");
  }
  bool has_pos = false, has_neg = false;
  for (int v : y) {
    if (v == 1) {
      has_pos = true;
    } else if (v == -1) {
      has_neg = true;
    } else {
      fail(ErrorKind::InvalidParams, "binary svm labels must be +1 or -1");
    }
  }
  if (!has_pos || !has_neg) fail(ErrorKind::SingleClassTraining, "binary svm needs both classes");

  const double gamma = resolve_gamma(params.gamma, x);
  const double c = params.c;
  std::vector<double> kernel(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    kernel[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      kernel[i * n + j] = kernel[j * n + i] = rbf_kernel(x.row(i), x.row(j), gamma);
    }
  }
  auto k = [&](std::size_t i, std::size_t j) { return kernel[i * n + j]; };
  auto yi = [&](std::size_t i) { return static_cast<double>(y[i]); };

  std::vector<double> alpha(n, 0.0);
  double b = 0.0;
  auto error = [&](std::size_t i) {
    double f = b;
    const double* row = &kernel[i * n];
    for (std::size_t t = 0; t < n; ++t) {
      if (alpha[t] != 0.0) f += alpha[t] * yi(t) * row[t];
    }
    return f - yi(i);
  };

  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<std::size_t> partner(0, n - 2);
  int passes = 0;
  int sweeps = 0;
  while (passes < params.max_passes && sweeps < params.max_sweeps) {
    ++sweeps;
    int changed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ei = error(i);
      const double r = yi(i) * ei;
      if (!((r < -params.smo_tol && alpha[i] < c) || (r > params.smo_tol && alpha[i] > 0.0))) continue;

      std::size_t j = partner(rng);
      if (j >= i) ++j;
      const double ej = error(j);
      const double ai_old = alpha[i], aj_old = alpha[j];
      double lo, hi;
      if (y[i] != y[j]) {
        lo = std::max(0.0, aj_old - ai_old);
        hi = std::min(c, c + aj_old - ai_old);
      } else {
        lo = std::max(0.0, ai_old + aj_old - c);
        hi = std::min(c, ai_old + aj_old);
      }
      if (lo >= hi) continue;
      const double eta = 2.0 * k(i, j) - k(i, i) - k(j, j);
      if (eta >= 0.0) continue;

      double aj = std::clamp(aj_old - yi(j) * (ei - ej) / eta, lo, hi);
      if (std::abs(aj - aj_old) < 1e-5) continue;
      double ai = ai_old + yi(i) * yi(j) * (aj_old - aj);
      ai = std::clamp(ai, 0.0, c);
      alpha[i] = ai;
      alpha[j] = aj;

      const double b1 = b - ei - yi(i) * (ai - ai_old) * k(i, i) - yi(j) * (aj - aj_old) * k(i, j);
      const double b2 = b - ej - yi(i) * (ai - ai_old) * k(i, j) - yi(j) * (aj - aj_old) * k(j, j);
      if (ai > 0.0 && ai < c) {
        b = b1;
      } else if (aj > 0.0 && aj < c) {
        b = b2;
      } else {
        b = 0.5 * (b1 + b2);
      }
      ++changed;
    }
    passes = changed == 0 ? passes + 1 : 0;
  }

  BinarySvm svm;
  svm.gamma = gamma;
  svm.bias = b;
  svm.alphas = alpha;
  svm.sweeps = sweeps;
  svm.converged = passes >= params.max_passes;
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < n; ++i) {
    if (alpha[i] > 0.0) support.push_back(i);
  }
  svm.support_vectors = x.select_rows(support);
  for (auto i : support) svm.dual_coef.push_back(alpha[i] * yi(i));
  return svm;
}

/// One binary machine per class (class vs rest), all sharing gamma.
struct MulticlassSvmModel {
  std::vector<BinarySvm> machines;
  int n_classes = 0;
  std::size_t feature_count = 0;

  friend bool operator==(const MulticlassSvmModel&, const MulticlassSvmModel&) = default;
};

inline MulticlassSvmModel train_ovr_svm(const Matrix& x, std::span<const int> y, const SvmParams& params,
                                        int n_classes, unsigned threads = 1) {
  check_labels(x, y, n_classes);
  SvmParams resolved = params;
  resolved.gamma = resolve_gamma(params.gamma, x);

  MulticlassSvmModel model;
  model.n_classes = n_classes;
  model.feature_count = x.cols();
  model.machines.resize(static_cast<std::size_t>(n_classes));
  parallel_for(
      model.machines.size(),
      [&](std::size_t cls) {
        std::vector<int> binary(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) binary[i] = y[i] == static_cast<int>(cls) ? 1 : -1;
        SvmParams p = resolved;
        p.seed = derive_seed(params.seed, cls);
        model.machines[cls] = smo_train_binary(x, binary, p);
      },
      threads);
  return model;
}

/// Scores are the per-class decision values.
inline Prediction predict_ovr_svm(const MulticlassSvmModel& model, std::span<const double> x) {
  if (x.size() != model.feature_count) fail(ErrorKind::DimensionMismatch, "svm input dimension");
  Prediction p;
  p.scores.reserve(model.machines.size());
  for (const auto& m : model.machines) p.scores.push_back(svm_decision(m, x));
  p.label = argmax_lowest(p.scores);
  return p;
}

}  // namespace respira
