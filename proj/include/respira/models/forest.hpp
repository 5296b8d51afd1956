#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "respira/error.hpp"
#include "respira/matrix.hpp"
#include "respira/models/prediction.hpp"
#include "respira/models/tree.hpp"
#include "respira/parallel.hpp"
#include "respira/random.hpp"

namespace respira {

struct ForestParams {
  int n_trees = 100;
  TreeParams tree;
  std::uint64_t seed = 0;

  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

struct RandomForestModel {
  std::vector<DecisionTree> trees;
  int n_classes = 0;
  std::size_t feature_count = 0;
  std::uint64_t master_seed = 0;

  friend bool operator==(const RandomForestModel&, const RandomForestModel&) = default;
};

inline void require_two_classes(std::span<const int> y) {
  std::set<int> present(y.begin(), y.end());
  if (present.size() < 2) fail(ErrorKind::SingleClassTraining, "training labels contain a single class");
}

/// Bagged trees. Tree i bootstraps and picks split features from its own
/// generator seeded with derive_seed(master_seed, i), so the result does not
/// depend on `threads`.
inline RandomForestModel train_forest(const Matrix& x, std::span<const int> y, const ForestParams& params,
                                      int n_classes, unsigned threads = 1) {
  if (params.n_trees < 1) fail(ErrorKind::InvalidParams, "n_trees must be >= 1");
  if (x.rows() < 2) fail(ErrorKind::TooFewInstances, "forest needs at least 2 rows");
  check_labels(x, y, n_classes);
  require_two_classes(y);

  RandomForestModel model;
  model.n_classes = n_classes;
  model.feature_count = x.cols();
  model.master_seed = params.seed;
  model.trees.resize(static_cast<std::size_t>(params.n_trees));
  const std::size_t n = x.rows();
  if (params.tree.min_samples_split < 2) fail(ErrorKind::InvalidParams, "min_samples_split must be >= 2");
  if (params.tree.max_depth != kUnlimitedDepth && params.tree.max_depth < 1) {
    fail(ErrorKind::InvalidParams, "max_depth must be >= 1 or unlimited");
  }
  const auto presorted = detail::presort_columns(x, y);

  parallel_for(
      model.trees.size(),
      [&](std::size_t i) {
        std::mt19937_64 rng(derive_seed(params.seed, i));
        std::uniform_int_distribution<std::size_t> draw(0, n - 1);
        std::vector<std::size_t> sample(n);
        for (auto& s : sample) s = draw(rng);
        model.trees[i] = train_tree_presorted(x, y, params.tree, rng, n_classes, std::move(sample), presorted);
      },
      threads);
  return model;
}

/// Class probabilities are vote fractions; the label is their mode.
inline Prediction predict_forest(const RandomForestModel& model, std::span<const double> x) {
  if (x.size() != model.feature_count) {
    fail(ErrorKind::DimensionMismatch, "forest expects " + std::to_string(model.feature_count) + " features");
  }
  Prediction p;
  p.scores.assign(static_cast<std::size_t>(model.n_classes), 0.0);
  for (const auto& tree : model.trees) p.scores[static_cast<std::size_t>(tree.predict(x))] += 1.0;
  for (auto& s : p.scores) s /= static_cast<double>(model.trees.size());
  p.label = argmax_lowest(p.scores);
  return p;
}

}  // namespace respira
