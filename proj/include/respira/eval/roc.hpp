#pragma once

// ROC analysis: threshold sweep with tied scores grouped, trapezoidal AUC,
// and one-vs-rest curves for multiclass score matrices.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "respira/error.hpp"
#include "respira/matrix.hpp"

namespace respira {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  /// Instances scoring >= threshold are called positive; +inf for the origin.
  double threshold = 0.0;

  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

struct RocCurve {
  std::vector<RocPoint> points;
  int positive_class = 1;

  friend bool operator==(const RocCurve&, const RocCurve&) = default;
};

/// Sorts by score descending and emits one point per distinct score, so a
/// block of tied scores moves the curve diagonally.
template <class Label>
RocCurve roc_curve(std::span<const double> scores, std::span<const Label> is_positive) {
  if (scores.size() != is_positive.size()) fail(ErrorKind::DimensionMismatch, "scores and labels differ in length");
  std::size_t pos = 0;
  for (auto l : is_positive) pos += static_cast<bool>(l) ? 1 : 0;
  const std::size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) fail(ErrorKind::OneClassOnly, "ROC needs positive and negative instances");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (static_cast<bool>(is_positive[order[i]]) ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back(
        {static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos), s});
  }
  // The sweep already ends at (1, 1); keep the explicit endpoint contract.
  if (curve.points.back().fpr != 1.0 || curve.points.back().tpr != 1.0) {
    curve.points.push_back({1.0, 1.0, -std::numeric_limits<double>::infinity()});
  }
  return curve;
}

inline RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& is_positive) {
  return roc_curve<int>(std::span<const double>(scores), std::span<const int>(is_positive));
}

/// Trapezoidal area over fpr.
inline double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return area;
}

struct OvrRoc {
  std::vector<RocCurve> curves;  // indexed by class
  std::vector<double> aucs;
  double macro_auc = 0.0;
};

/// One curve per class from that class's score column.
inline OvrRoc ovr_roc(const Matrix& class_scores, std::span<const int> labels) {
  if (class_scores.rows() != labels.size()) fail(ErrorKind::DimensionMismatch, "score rows and labels differ");
  OvrRoc out;
  const std::size_t k = class_scores.cols();
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> s(labels.size());
    std::vector<int> positive(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      s[i] = class_scores(i, c);
      positive[i] = labels[i] == static_cast<int>(c);
    }
    try {
      auto curve = roc_curve<int>(s, positive);
      curve.positive_class = static_cast<int>(c);
      out.aucs.push_back(auc(curve));
      out.curves.push_back(std::move(curve));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::OneClassOnly) fail(ErrorKind::OneClassOnly, "class " + std::to_string(c));
      throw;
    }
  }
  out.macro_auc = k == 0 ? 0.0 : std::accumulate(out.aucs.begin(), out.aucs.end(), 0.0) / static_cast<double>(k);
  return out;
}

}  // namespace respira
