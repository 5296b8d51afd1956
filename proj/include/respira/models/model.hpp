#pragma once

// Uniform train/predict surface over the three classifiers, plus the
// versioned JSON model format.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "respira/error.hpp"
#include "respira/matrix.hpp"
#include "respira/models/forest.hpp"
#include "respira/models/logreg.hpp"
#include "respira/models/prediction.hpp"
#include "respira/models/svm.hpp"

namespace respira {

enum class ModelKind { Forest, Logreg, Svm };

constexpr std::string_view to_string(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::Forest: return "forest";
    case ModelKind::Logreg: return "logreg";
    case ModelKind::Svm: return "svm";
  }
  return "unknown";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
  for (auto k : {ModelKind::Forest, ModelKind::Logreg, ModelKind::Svm}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

struct Hyperparams {
  ForestParams forest;
  LogregParams logreg;
  SvmParams svm;

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

struct ModelSpec {
  ModelKind kind = ModelKind::Forest;
  Hyperparams params;
  /// Master seed; cross-validation derives one child seed per fold from it.
  std::uint64_t seed = 0;

  /// Seeds every stochastic component of the hyperparameters.
  void reseed(std::uint64_t value) {
    params.forest.seed = value;
    params.svm.seed = value;
  }
};

using TrainedModel = std::variant<RandomForestModel, LogisticModel, MulticlassSvmModel>;

inline TrainedModel train_model(const ModelSpec& spec, const Matrix& x, std::span<const int> y, int n_classes,
                                unsigned threads = 1) {
  switch (spec.kind) {
    case ModelKind::Forest: return train_forest(x, y, spec.params.forest, n_classes, threads);
    case ModelKind::Logreg:
      require_two_classes(y);
      return train_logreg(x, y, spec.params.logreg, n_classes);
    case ModelKind::Svm: return train_ovr_svm(x, y, spec.params.svm, n_classes, threads);
  }
  fail(ErrorKind::InvalidParams, "unknown model kind");
}

inline Prediction predict(const TrainedModel& model, std::span<const double> x) {
  struct Visitor {
    std::span<const double> x;
    Prediction operator()(const RandomForestModel& m) const { return predict_forest(m, x); }
    Prediction operator()(const LogisticModel& m) const { return predict_logreg(m, x); }
    Prediction operator()(const MulticlassSvmModel& m) const { return predict_ovr_svm(m, x); }
  };
  return std::visit(Visitor{x}, model);
}

inline ModelKind kind_of(const TrainedModel& model) {
  return static_cast<ModelKind>(model.index());
}

// ---------------------------------------------------------------------------
// JSON

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const Hyperparams& h, ModelKind kind) {
  using nlohmann::json;
  switch (kind) {
    case ModelKind::Forest: {
      const auto& f = h.forest;
      return {{"n_trees", f.n_trees},
              {"max_depth", f.tree.max_depth == kUnlimitedDepth ? json("unlimited") : json(f.tree.max_depth)},
              {"min_samples_split", f.tree.min_samples_split},
              {"features_per_split", f.tree.features_per_split == 0 ? json("sqrt") : json(f.tree.features_per_split)},
              {"seed", f.seed}};
    }
    case ModelKind::Logreg: {
      const auto& l = h.logreg;
      return {{"learning_rate", l.learning_rate},
              {"l2_lambda", l.l2_lambda},
              {"max_iters", l.max_iters},
              {"loss_tol", l.loss_tol}};
    }
    case ModelKind::Svm: {
      const auto& s = h.svm;
      return {{"c", s.c},
              {"gamma", s.gamma ? json(*s.gamma) : json("scale")},
              {"smo_tol", s.smo_tol},
              {"max_passes", s.max_passes},
              {"max_sweeps", s.max_sweeps},
              {"seed", s.seed}};
    }
  }
  return {};
}

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  Matrix m(rows, cols);
  const auto& data = j.at("data");
  if (data.size() != rows) fail(ErrorKind::SchemaViolation, "matrix rows");
  for (std::size_t i = 0; i < rows; ++i) {
    const auto r = data[i].get<std::vector<double>>();
    if (r.size() != cols) fail(ErrorKind::SchemaViolation, "matrix cols");
    std::copy(r.begin(), r.end(), m.row(i).begin());
  }
  return m;
}

}  // namespace detail

/// Enough to reload for prediction; training diagnostics are not kept.
inline nlohmann::json model_to_json(const TrainedModel& model) {
  using nlohmann::json;
  json out = {{"format_version", kModelFormatVersion}, {"kind", std::string(to_string(kind_of(model)))}};
  if (const auto* f = std::get_if<RandomForestModel>(&model)) {
    out["n_classes"] = f->n_classes;
    out["feature_count"] = f->feature_count;
    out["master_seed"] = f->master_seed;
    json trees = json::array();
    for (const auto& t : f->trees) {
      json nodes = json::array();
      for (const auto& n : t.nodes) {
        if (n.is_leaf()) {
          nodes.push_back({{"counts", n.class_counts}});
        } else {
          nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
        }
      }
      trees.push_back(nodes);
    }
    out["trees"] = trees;
  } else if (const auto* l = std::get_if<LogisticModel>(&model)) {
    out["weights"] = detail::matrix_to_json(l->weights);
    out["converged"] = l->converged;
    out["final_loss"] = l->final_loss;
  } else if (const auto* s = std::get_if<MulticlassSvmModel>(&model)) {
    out["n_classes"] = s->n_classes;
    out["feature_count"] = s->feature_count;
    json machines = json::array();
    for (const auto& m : s->machines) {
      machines.push_back({{"support_vectors", detail::matrix_to_json(m.support_vectors)},
                          {"dual_coef", m.dual_coef},
                          {"bias", m.bias},
                          {"gamma", m.gamma}});
    }
    out["machines"] = machines;
  }
  return out;
}

inline nlohmann::json model_to_json(const TrainedModel& model, const ModelSpec& spec) {
  auto out = model_to_json(model);
  out["hyperparams"] = to_json(spec.params, spec.kind);
  return out;
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      fail(ErrorKind::SchemaViolation, "format_version");
    }
    const auto kind = parse_model_kind(j.at("kind").get<std::string>());
    if (!kind) fail(ErrorKind::SchemaViolation, "kind");
    switch (*kind) {
      case ModelKind::Forest: {
        RandomForestModel f;
        f.n_classes = j.at("n_classes").get<int>();
        f.feature_count = j.at("feature_count").get<std::size_t>();
        f.master_seed = j.at("master_seed").get<std::uint64_t>();
        for (const auto& jt : j.at("trees")) {
          DecisionTree t;
          t.n_classes = f.n_classes;
          t.feature_count = f.feature_count;
          for (const auto& jn : jt) {
            TreeNode n;
            if (jn.contains("counts")) {
              n.class_counts = jn["counts"].get<std::vector<int>>();
            } else {
              n.feature = jn.at("feature").get<int>();
              n.threshold = jn.at("threshold").get<double>();
              n.left = jn.at("left").get<int>();
              n.right = jn.at("right").get<int>();
            }
            t.nodes.push_back(std::move(n));
          }
          f.trees.push_back(std::move(t));
        }
        return f;
      }
      case ModelKind::Logreg: {
        LogisticModel l;
        l.weights = detail::matrix_from_json(j.at("weights"));
        l.converged = j.at("converged").get<bool>();
        l.final_loss = j.at("final_loss").get<double>();
        return l;
      }
      case ModelKind::Svm: {
        MulticlassSvmModel s;
        s.n_classes = j.at("n_classes").get<int>();
        s.feature_count = j.at("feature_count").get<std::size_t>();
        for (const auto& jm : j.at("machines")) {
          BinarySvm m;
          m.support_vectors = detail::matrix_from_json(jm.at("support_vectors"));
          m.dual_coef = jm.at("dual_coef").get<std::vector<double>>();
          m.bias = jm.at("bias").get<double>();
          m.gamma = jm.at("gamma").get<double>();
          s.machines.push_back(std::move(m));
        }
        return s;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::SchemaViolation, std::string("model json: ") + e.what());
  }
  fail(ErrorKind::SchemaViolation, "kind");
}

}  // namespace respira
