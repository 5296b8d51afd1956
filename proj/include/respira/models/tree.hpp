#pragma once

// CART-style classification tree with Gini impurity.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "respira/error.hpp"
#include "respira/matrix.hpp"
#include "respira/models/prediction.hpp"

namespace respira {

inline constexpr int kUnlimitedDepth = -1;

/// Splits whose impurity differs by less than this are treated as ties.
inline constexpr double kGiniTieTolerance = 1e-12;

template <class Count>
double gini(std::span<const Count> class_counts) {
  double total = 0.0;
  for (auto c : class_counts) total += static_cast<double>(c);
  if (!(total >= 1.0)) fail(ErrorKind::EmptyNode, "gini of an empty node");
  double sum_sq = 0.0;
  for (auto c : class_counts) {
    const double p = static_cast<double>(c) / total;
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

inline double gini(const std::vector<int>& class_counts) { return gini(std::span<const int>(class_counts)); }

/// Child-size weighted impurity of a candidate split.
inline double weighted_gini(std::span<const int> left, std::span<const int> right) {
  double nl = 0.0, nr = 0.0;
  for (int c : left) nl += c;
  for (int c : right) nr += c;
  return (nl * gini(left) + nr * gini(right)) / (nl + nr);
}

struct SplitChoice {
  std::size_t feature = 0;
  double threshold = 0.0;
  double weighted_gini = 0.0;
};

inline void check_labels(const Matrix& x, std::span<const int> y, int n_classes) {
  if (y.size() != x.rows()) {
    fail(ErrorKind::DimensionMismatch, std::to_string(x.rows()) + " rows but " + std::to_string(y.size()) + " labels");
  }
  for (int label : y) {
    if (label < 0 || label >= n_classes) fail(ErrorKind::InvalidParams, "label out of range: " + std::to_string(label));
  }
}

namespace detail {

/// Scratch buffer reused across nodes of one tree.
struct SplitScratch {
  std::vector<std::pair<double, int>> sorted;
  std::vector<int> left;
  std::vector<int> right;
};

/// Scans the (value, label) pairs already in `scratch.sorted` for `feature`
/// and updates the running best. Squared class counts are kept as exact
/// integers, so each candidate costs O(1):
/// weighted Gini = (n - sumsq_left / n_left - sumsq_right / n_right) / n.
inline void scan_sorted_feature(std::size_t feature, std::span<const int> parent, SplitScratch& scratch,
                                double& best_score, std::optional<SplitChoice>& best) {
  const auto& sorted = scratch.sorted;
  auto& left = scratch.left;
  auto& right = scratch.right;
  left.assign(parent.size(), 0);
  right.assign(parent.begin(), parent.end());
  std::int64_t sq_left = 0, sq_right = 0;
  for (int c : parent) sq_right += static_cast<std::int64_t>(c) * c;
  const auto n = static_cast<std::int64_t>(sorted.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    const auto cls = static_cast<std::size_t>(sorted[i].second);
    sq_left += 2 * static_cast<std::int64_t>(left[cls]) + 1;
    sq_right -= 2 * static_cast<std::int64_t>(right[cls]) - 1;
    ++left[cls];
    --right[cls];
    if (!(sorted[i].first < sorted[i + 1].first)) continue;
    const auto n_left = static_cast<std::int64_t>(i + 1);
    const double score = (static_cast<double>(n) - static_cast<double>(sq_left) / static_cast<double>(n_left) -
                          static_cast<double>(sq_right) / static_cast<double>(n - n_left)) *
                         inv_n;
    if (score < best_score) {
      best_score = score - kGiniTieTolerance;
      best = SplitChoice{feature, 0.5 * (sorted[i].first + sorted[i + 1].first), score};
    }
  }
}

/// Row order of every column sorted by (value, label, row), computed once per
/// training matrix so large nodes can skip per-node sorting.
struct PresortedColumns {
  std::vector<std::vector<std::size_t>> order;
};

inline PresortedColumns presort_columns(const Matrix& x, std::span<const int> y) {
  PresortedColumns p;
  p.order.resize(x.cols());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    auto& o = p.order[f];
    o.resize(x.rows());
    std::iota(o.begin(), o.end(), std::size_t{0});
    std::sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) {
      const double va = x(a, f), vb = x(b, f);
      if (va != vb) return va < vb;
      if (y[a] != y[b]) return y[a] < y[b];
      return a < b;
    });
  }
  return p;
}

/// Best split over `rows` (a multiset: bootstrap duplicates allowed).
/// When `presorted` is given and `multiplicity` holds each row's count in
/// `rows`, large nodes gather their sorted pairs from the presorted order;
/// the resulting sequence equals the sorted one, so the choice is identical.
inline std::optional<SplitChoice> best_split_rows(const Matrix& x, std::span<const int> y,
                                                  std::span<const std::size_t> rows,
                                                  std::span<const std::size_t> features, int n_classes,
                                                  SplitScratch& scratch,
                                                  const PresortedColumns* presorted = nullptr,
                                                  std::span<const int> multiplicity = {}) {
  if (rows.size() < 2) return std::nullopt;
  std::vector<int> parent(static_cast<std::size_t>(n_classes), 0);
  for (auto r : rows) ++parent[static_cast<std::size_t>(y[r])];
  const double parent_gini = gini(std::span<const int>(parent));
  if (parent_gini <= 0.0) return std::nullopt;

  const bool gather = presorted != nullptr && rows.size() * 8 >= x.rows();
  std::optional<SplitChoice> best;
  double best_score = parent_gini - kGiniTieTolerance;
  auto& sorted = scratch.sorted;
  for (std::size_t f : features) {
    sorted.clear();
    if (gather) {
      for (auto r : presorted->order[f]) {
        for (int m = 0; m < multiplicity[r]; ++m) sorted.emplace_back(x(r, f), y[r]);
      }
    } else {
      for (auto r : rows) sorted.emplace_back(x(r, f), y[r]);
      std::sort(sorted.begin(), sorted.end());
    }
    scan_sorted_feature(f, parent, scratch, best_score, best);
  }
  return best;
}

}  // namespace detail

/// Best (feature, midpoint) split over the given features, or nothing when no
/// candidate lowers the parent impurity. Ties go to the lower feature index,
/// then the lower threshold.
inline std::optional<SplitChoice> best_split(const Matrix& x, std::span<const int> y,
                                             std::span<const std::size_t> feature_subset) {
  if (x.rows() < 2 || feature_subset.empty()) return std::nullopt;
  const int n_classes = y.empty() ? 0 : *std::max_element(y.begin(), y.end()) + 1;
  check_labels(x, y, n_classes);
  std::vector<std::size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::vector<std::size_t> features(feature_subset.begin(), feature_subset.end());
  std::sort(features.begin(), features.end());
  detail::SplitScratch scratch;
  return detail::best_split_rows(x, y, rows, features, n_classes, scratch);
}

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<int> class_counts;  // leaves only

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Flat binary tree; node 0 is the root. Rows with x[f] <= threshold go left.
struct DecisionTree {
  std::vector<TreeNode> nodes;
  int n_classes = 0;
  std::size_t feature_count = 0;

  const TreeNode& leaf_for(std::span<const double> x) const {
    const TreeNode* node = &nodes.front();
    while (!node->is_leaf()) {
      node = &nodes[static_cast<std::size_t>(x[static_cast<std::size_t>(node->feature)] <= node->threshold
                                                  ? node->left
                                                  : node->right)];
    }
    return *node;
  }

  int predict(std::span<const double> x) const {
    const auto& counts = leaf_for(x).class_counts;
    return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }

  std::size_t depth() const { return depth_from(0); }

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

 private:
  std::size_t depth_from(int index) const {
    const auto& n = nodes[static_cast<std::size_t>(index)];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(n.left), depth_from(n.right));
  }
};

struct TreeParams {
  int max_depth = kUnlimitedDepth;
  int min_samples_split = 2;
  /// 0 selects floor(sqrt(d)).
  int features_per_split = 0;

  friend bool operator==(const TreeParams&, const TreeParams&) = default;
};

inline std::size_t resolve_features_per_split(int requested, std::size_t d) {
  if (requested > 0) return std::min<std::size_t>(static_cast<std::size_t>(requested), d);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));
}

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const int> y, const TreeParams& params, int n_classes, std::mt19937_64& rng,
              const PresortedColumns* presorted = nullptr)
      : x_(x), y_(y), params_(params), n_classes_(n_classes), rng_(rng),
        mtry_(resolve_features_per_split(params.features_per_split, x.cols())), all_features_(x.cols()),
        presorted_(presorted), multiplicity_(presorted ? x.rows() : 0, 0) {
    std::iota(all_features_.begin(), all_features_.end(), std::size_t{0});
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    tree_.n_classes = n_classes_;
    tree_.feature_count = x_.cols();
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t> rows, int depth) {
    const int index = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    std::vector<int> counts(static_cast<std::size_t>(n_classes_), 0);
    for (auto r : rows) ++counts[static_cast<std::size_t>(y_[r])];
    const bool pure = std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }) <= 1;
    const bool depth_reached = params_.max_depth != kUnlimitedDepth && depth >= params_.max_depth;
    const bool too_small = static_cast<int>(rows.size()) < params_.min_samples_split;

    std::optional<SplitChoice> split;
    if (!pure && !depth_reached && !too_small) {
      const auto features = sample_features();
      if (presorted_) {
        for (auto r : rows) ++multiplicity_[r];
        split = best_split_rows(x_, y_, rows, features, n_classes_, scratch_, presorted_, multiplicity_);
        for (auto r : rows) multiplicity_[r] = 0;
      } else {
        split = best_split_rows(x_, y_, rows, features, n_classes_, scratch_);
      }
    }
    if (!split) {
      tree_.nodes[static_cast<std::size_t>(index)].class_counts = std::move(counts);
      return index;
    }

    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : rows) (x_(r, split->feature) <= split->threshold ? left_rows : right_rows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int left = grow(std::move(left_rows), depth + 1);
    const int right = grow(std::move(right_rows), depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(index)];
    node.feature = static_cast<int>(split->feature);
    node.threshold = split->threshold;
    node.left = left;
    node.right = right;
    return index;
  }

  std::span<const std::size_t> sample_features() {
    const std::size_t d = all_features_.size();
    if (mtry_ >= d) {
      subset_.assign(all_features_.begin(), all_features_.end());
      std::sort(subset_.begin(), subset_.end());
      return subset_;
    }
    for (std::size_t i = 0; i < mtry_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, d - 1);
      std::swap(all_features_[i], all_features_[pick(rng_)]);
    }
    subset_.assign(all_features_.begin(), all_features_.begin() + static_cast<std::ptrdiff_t>(mtry_));
    std::sort(subset_.begin(), subset_.end());
    return subset_;
  }

  const Matrix& x_;
  std::span<const int> y_;
  const TreeParams& params_;
  int n_classes_;
  std::mt19937_64& rng_;
  std::size_t mtry_;
  std::vector<std::size_t> all_features_;
  std::vector<std::size_t> subset_;
  const PresortedColumns* presorted_;
  std::vector<int> multiplicity_;
  SplitScratch scratch_;
  DecisionTree tree_;
};

}  // namespace detail

/// Grows a tree on the given row sample (duplicates allowed, as produced by
/// bootstrapping). An empty sample means every row once.
inline DecisionTree train_tree(const Matrix& x, std::span<const int> y, const TreeParams& params,
                               std::mt19937_64& rng, int n_classes, std::vector<std::size_t> rows = {}) {
  if (x.rows() < 2) fail(ErrorKind::TooFewInstances, "tree needs at least 2 rows");
  check_labels(x, y, n_classes);
  if (params.min_samples_split < 2) fail(ErrorKind::InvalidParams, "min_samples_split must be >= 2");
  if (params.max_depth != kUnlimitedDepth && params.max_depth < 1) {
    fail(ErrorKind::InvalidParams, "max_depth must be >= 1 or unlimited");
  }
  if (rows.empty()) {
    rows.resize(x.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  }
  return detail::TreeBuilder(x, y, params, n_classes, rng).build(std::move(rows));
}

/// Same as train_tree with column orders shared across calls (forest use).
inline DecisionTree train_tree_presorted(const Matrix& x, std::span<const int> y, const TreeParams& params,
                                         std::mt19937_64& rng, int n_classes, std::vector<std::size_t> rows,
                                         const detail::PresortedColumns& presorted) {
  return detail::TreeBuilder(x, y, params, n_classes, rng, &presorted).build(std::move(rows));
}

}  // namespace respira
