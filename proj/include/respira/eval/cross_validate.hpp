#pragma once

// Cross-validation driver: per-fold scaling fitted on training rows only,
// model training through a factory, pooled confusion matrix and OvR ROC.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "respira/dataset.hpp"
#include "respira/error.hpp"
#include "respira/eval/roc.hpp"
#include "respira/eval/splits.hpp"
#include "respira/features.hpp"
#include "respira/matrix.hpp"
#include "respira/models/model.hpp"
#include "respira/parallel.hpp"
#include "respira/preprocess.hpp"
#include "respira/random.hpp"

namespace respira {

using Predictor = std::function<Prediction(std::span<const double>)>;

/// A factory trains on one fold and hands back a predictor for that fold.
template <class F>
concept ClassifierFactory = requires(const F& f, const Matrix& x, std::span<const int> y, int k, std::size_t fold) {
  { f(x, y, k, fold) } -> std::convertible_to<Predictor>;
};

/// Factory for the built-in models. Fold i trains with seed
/// derive_seed(spec seed, i).
inline auto model_factory(ModelSpec spec) {
  return [spec](const Matrix& x, std::span<const int> y, int n_classes, std::size_t fold) -> Predictor {
    ModelSpec local = spec;
    local.reseed(derive_seed(spec.seed, fold));
    auto model = std::make_shared<const TrainedModel>(train_model(local, x, y, n_classes));
    return [model](std::span<const double> row) { return predict(*model, row); };
  };
}

struct FoldResult {
  std::size_t index = 0;
  bool skipped = false;
  double accuracy = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::optional<ScalerParams> scaler;
};

struct CvOptions {
  bool scaling = true;
  int n_classes = kClassCount;
  unsigned threads = 1;
};

struct CvReport {
  std::vector<FoldResult> folds;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  /// confusion[true][predicted], pooled over folds.
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<std::optional<RocCurve>> roc;  // per class; empty when undefined
  std::vector<double> auc;                   // NaN where the curve is undefined
  double macro_auc = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;
  nlohmann::json config;

  /// Pooled out-of-fold predictions, ordered by instance index.
  std::vector<std::size_t> pooled_index;
  std::vector<int> pooled_label;
  std::vector<int> pooled_predicted;
  Matrix pooled_scores;

  std::size_t skipped_folds() const {
    return static_cast<std::size_t>(std::count_if(folds.begin(), folds.end(), [](const auto& f) { return f.skipped; }));
  }
};

template <ClassifierFactory Factory>
CvReport cross_validate(const Factory& factory, const Matrix& x, std::span<const int> labels,
                        std::span<const Split> splits, const CvOptions& options = {}) {
  if (labels.size() != x.rows()) fail(ErrorKind::DimensionMismatch, "labels do not match rows");
  if (splits.empty()) fail(ErrorKind::InvalidParams, "no splits");
  const int k = options.n_classes;
  const std::set<int> all_classes(labels.begin(), labels.end());

  struct FoldOutput {
    FoldResult result;
    std::vector<int> predicted;
    std::vector<std::vector<double>> scores;
  };
  std::vector<FoldOutput> outputs(splits.size());

  parallel_for(
      splits.size(),
      [&](std::size_t f) {
        const Split& split = splits[f];
        FoldOutput& out = outputs[f];
        out.result.index = f;
        out.result.n_train = split.train_indices.size();
        out.result.n_test = split.test_indices.size();
        std::vector<int> train_y;
        train_y.reserve(split.train_indices.size());
        for (auto i : split.train_indices) train_y.push_back(labels[i]);
        const std::set<int> train_classes(train_y.begin(), train_y.end());
        if (train_classes != all_classes || split.test_indices.empty()) {
          out.result.skipped = true;
          return;
        }

        Matrix train_x = x.select_rows(split.train_indices);
        Matrix test_x = x.select_rows(split.test_indices);
        if (options.scaling) {
          auto params = zscore_fit(train_x);
          train_x = zscore_apply(params, train_x);
          test_x = zscore_apply(params, test_x);
          out.result.scaler = std::move(params);
        }

        const Predictor predictor = factory(train_x, std::span<const int>(train_y), k, f);
        std::size_t correct = 0;
        for (std::size_t t = 0; t < split.test_indices.size(); ++t) {
          auto p = predictor(test_x.row(t));
          if (p.label == labels[split.test_indices[t]]) ++correct;
          out.predicted.push_back(p.label);
          out.scores.push_back(std::move(p.scores));
        }
        out.result.accuracy = static_cast<double>(correct) / static_cast<double>(split.test_indices.size());
      },
      options.threads);

  CvReport report;
  report.confusion.assign(static_cast<std::size_t>(k), std::vector<std::size_t>(static_cast<std::size_t>(k), 0));
  std::vector<double> accuracies;
  struct Pooled {
    std::size_t index;
    int predicted;
    const std::vector<double>* scores;
  };
  std::vector<Pooled> pooled;
  for (std::size_t f = 0; f < outputs.size(); ++f) {
    report.folds.push_back(outputs[f].result);
    if (outputs[f].result.skipped) {
      report.warnings.push_back("fold " + std::to_string(f) + " skipped: training rows miss a class");
      continue;
    }
    accuracies.push_back(outputs[f].result.accuracy);
    for (std::size_t t = 0; t < splits[f].test_indices.size(); ++t) {
      pooled.push_back({splits[f].test_indices[t], outputs[f].predicted[t], &outputs[f].scores[t]});
    }
  }
  if (accuracies.empty()) fail(ErrorKind::AllFoldsSkipped, std::to_string(splits.size()) + " folds skipped");

  double sum = 0.0;
  for (double a : accuracies) sum += a;
  report.accuracy_mean = sum / static_cast<double>(accuracies.size());
  double var = 0.0;
  for (double a : accuracies) var += (a - report.accuracy_mean) * (a - report.accuracy_mean);
  report.accuracy_std = std::sqrt(var / static_cast<double>(accuracies.size()));

  std::stable_sort(pooled.begin(), pooled.end(), [](const Pooled& a, const Pooled& b) { return a.index < b.index; });
  report.pooled_scores = Matrix(pooled.size(), static_cast<std::size_t>(k));
  for (std::size_t r = 0; r < pooled.size(); ++r) {
    const int truth = labels[pooled[r].index];
    report.pooled_index.push_back(pooled[r].index);
    report.pooled_label.push_back(truth);
    report.pooled_predicted.push_back(pooled[r].predicted);
    report.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pooled[r].predicted)] += 1;
    const auto& s = *pooled[r].scores;
    if (s.size() != static_cast<std::size_t>(k)) fail(ErrorKind::DimensionMismatch, "predictor returned wrong score count");
    std::copy(s.begin(), s.end(), report.pooled_scores.row(r).begin());
  }

  double auc_sum = 0.0;
  std::size_t auc_count = 0;
  for (int c = 0; c < k; ++c) {
    std::vector<double> s(pooled.size());
    std::vector<int> positive(pooled.size());
    std::size_t pos = 0;
    for (std::size_t r = 0; r < pooled.size(); ++r) {
      s[r] = report.pooled_scores(r, static_cast<std::size_t>(c));
      positive[r] = report.pooled_label[r] == c;
      pos += static_cast<std::size_t>(positive[r]);
    }
    if (pos == 0 || pos == pooled.size()) {
      report.roc.emplace_back();
      report.auc.push_back(std::numeric_limits<double>::quiet_NaN());
      report.warnings.push_back("ROC undefined for class " + std::to_string(c) + ": one-class pooled labels");
      continue;
    }
    auto curve = roc_curve<int>(s, positive);
    curve.positive_class = c;
    report.auc.push_back(auc(curve));
    auc_sum += report.auc.back();
    ++auc_count;
    report.roc.emplace_back(std::move(curve));
  }
  if (auc_count > 0) report.macro_auc = auc_sum / static_cast<double>(auc_count);
  return report;
}

template <ClassifierFactory Factory>
CvReport cross_validate(const Factory& factory, const FeatureMatrix& m, std::span<const Split> splits,
                        const CvOptions& options = {}) {
  return cross_validate(factory, m.values, std::span<const int>(m.labels), splits, options);
}

// ---------------------------------------------------------------------------
// Forest grid search

struct ForestGrid {
  std::vector<int> n_trees = {50, 100, 200};
  std::vector<int> max_depth = {5, 10, kUnlimitedDepth};
  std::size_t inner_k = 3;
};

/// Picks (n_trees, max_depth) by stratified inner k-fold accuracy on the
/// given training rows. Ties keep the earlier grid entry.
inline ForestParams select_forest_params(const Matrix& x, std::span<const int> y, const ForestParams& base,
                                         const ForestGrid& grid, int n_classes) {
  const auto inner = kfold_splits(y, std::min(grid.inner_k, x.rows()), derive_seed(base.seed, 0x7E57), true);
  ForestParams best = base;
  double best_acc = -1.0;
  for (int trees : grid.n_trees) {
    for (int depth : grid.max_depth) {
      ForestParams candidate = base;
      candidate.n_trees = trees;
      candidate.tree.max_depth = depth;
      ModelSpec spec{ModelKind::Forest, {}, candidate.seed};
      spec.params.forest = candidate;
      const auto rep = cross_validate(model_factory(spec), x, y, inner, CvOptions{false, n_classes, 1});
      if (rep.accuracy_mean > best_acc) {
        best_acc = rep.accuracy_mean;
        best = candidate;
      }
    }
  }
  return best;
}

inline auto tuned_forest_factory(ModelSpec spec, ForestGrid grid) {
  return [spec, grid](const Matrix& x, std::span<const int> y, int n_classes, std::size_t fold) -> Predictor {
    ForestParams base = spec.params.forest;
    base.seed = derive_seed(spec.seed, fold);
    const auto chosen = select_forest_params(x, y, base, grid, n_classes);
    auto model = std::make_shared<const TrainedModel>(train_forest(x, y, chosen, n_classes));
    return [model](std::span<const double> row) { return predict(*model, row); };
  };
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline nlohmann::json nan_to_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace detail

inline nlohmann::json to_json(const CvReport& r) {
  using nlohmann::json;
  json folds = json::array();
  for (const auto& f : r.folds) {
    folds.push_back({{"index", f.index},
                     {"skipped", f.skipped},
                     {"n_train", f.n_train},
                     {"n_test", f.n_test},
                     {"accuracy", f.skipped ? json(nullptr) : json(f.accuracy)}});
  }
  json auc = json::object();
  for (std::size_t c = 0; c < r.auc.size(); ++c) {
    const auto name = c < static_cast<std::size_t>(kClassCount)
                          ? std::string(to_string(static_cast<BreathingType>(c)))
                          : "class_" + std::to_string(c);
    auc[name] = detail::nan_to_null(r.auc[c]);
  }
  return {{"config", r.config},
          {"accuracy_mean", r.accuracy_mean},
          {"accuracy_std", r.accuracy_std},
          {"n_folds", r.folds.size()},
          {"skipped_folds", r.skipped_folds()},
          {"confusion_matrix", r.confusion},
          {"auc", auc},
          {"macro_auc", detail::nan_to_null(r.macro_auc)},
          {"warnings", r.warnings},
          {"folds", folds}};
}

inline void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot open " + path.string());
  out << "threshold,fpr,tpr\n";
  for (const auto& p : curve.points) {
    const std::string t = std::isinf(p.threshold) ? (p.threshold > 0 ? "inf" : "-inf") : detail::format_double(p.threshold);
    out << t << ',' << detail::format_double(p.fpr) << ',' << detail::format_double(p.tpr) << '\n';
  }
  if (!out) fail(ErrorKind::IoFailure, "write failed for " + path.string());
}

}  // namespace respira
