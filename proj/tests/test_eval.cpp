#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <set>

#include "respira/eval/cross_validate.hpp"
#include "test_support.hpp"

using namespace respira;
using Catch::Approx;

namespace {

void check_partition(const std::vector<Split>& splits, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& s : splits) {
    REQUIRE(std::is_sorted(s.test_indices.begin(), s.test_indices.end()));
    REQUIRE(std::is_sorted(s.train_indices.begin(), s.train_indices.end()));
    REQUIRE(s.train_indices.size() + s.test_indices.size() == n);
    std::vector<std::size_t> both;
    std::set_intersection(s.train_indices.begin(), s.train_indices.end(), s.test_indices.begin(),
                          s.test_indices.end(), std::back_inserter(both));
    REQUIRE(both.empty());
    for (auto i : s.test_indices) ++seen[i];
  }
  for (int c : seen) REQUIRE(c == 1);
}

std::vector<int> cyclic_labels(std::size_t n, int k) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % static_cast<std::size_t>(k));
  return y;
}

Prediction one_hot(int label, int k) {
  Prediction p;
  p.label = label;
  p.scores.assign(static_cast<std::size_t>(k), 0.0);
  p.scores[static_cast<std::size_t>(label)] = 1.0;
  return p;
}

/// Reads the true label out of column 0.
auto oracle_factory() {
  return [](const Matrix&, std::span<const int>, int k, std::size_t) -> Predictor {
    return [k](std::span<const double> row) { return one_hot(static_cast<int>(std::lround(row[0])), k); };
  };
}

auto constant_factory(int label) {
  return [label](const Matrix&, std::span<const int>, int k, std::size_t) -> Predictor {
    return [label, k](std::span<const double>) { return one_hot(label, k); };
  };
}

auto nearest_neighbor_factory() {
  return [](const Matrix& x, std::span<const int> y, int k, std::size_t) -> Predictor {
    auto train_x = std::make_shared<Matrix>(x);
    auto train_y = std::make_shared<std::vector<int>>(y.begin(), y.end());
    return [train_x, train_y, k](std::span<const double> row) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < train_x->rows(); ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) d += ((*train_x)(i, j) - row[j]) * ((*train_x)(i, j) - row[j]);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      return one_hot((*train_y)[best], k);
    };
  };
}

/// Tie-corrected concordant-pair fraction.
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& pos) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!pos[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (pos[j]) continue;
      den += 1.0;
      num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return num / den;
}

}  // namespace

// ---------------------------------------------------------------------------
// Splitters

TEST_CASE("leave-one-out splits") {
  const auto s = loocv_splits(5);
  REQUIRE(s.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(s[i].test_indices == std::vector<std::size_t>{i});
    CHECK(s[i].train_indices.size() == 4);
  }
  check_partition(s, 5);
  REQUIRE_ERROR(loocv_splits(1), ErrorKind::TooFewInstances);
}

TEST_CASE("k-fold sizes") {
  const auto ten = kfold_splits(cyclic_labels(10, 1), 5, 1, false);
  for (const auto& s : ten) CHECK(s.test_indices.size() == 2);
  const auto eleven = kfold_splits(cyclic_labels(11, 1), 5, 1, false);
  std::vector<std::size_t> sizes;
  for (const auto& s : eleven) sizes.push_back(s.test_indices.size());
  CHECK(sizes == std::vector<std::size_t>{3, 2, 2, 2, 2});
}

TEST_CASE("k-fold partitions for several sizes") {
  for (bool stratified : {false, true}) {
    for (std::size_t k : {2u, 5u, 10u}) {
      for (std::size_t n : {10u, 11u, 30u, 100u}) {
        const auto labels = cyclic_labels(n, 3);
        const auto splits = kfold_splits(labels, k, 99, stratified);
        REQUIRE(splits.size() == k);
        check_partition(splits, n);
        std::size_t lo = n, hi = 0;
        for (const auto& s : splits) {
          lo = std::min(lo, s.test_indices.size());
          hi = std::max(hi, s.test_indices.size());
        }
        CHECK(hi - lo <= 1);
      }
    }
  }
}

TEST_CASE("stratified folds hold every class when feasible") {
  const std::vector<int> labels = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2};
  const auto splits = kfold_splits(labels, 4, 3, true);
  for (const auto& s : splits) {
    std::multiset<int> classes;
    for (auto i : s.test_indices) classes.insert(labels[i]);
    CHECK(classes == std::multiset<int>{0, 1, 2});
  }
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> y(40);
    std::uniform_int_distribution<int> u(0, 2);
    for (auto& v : y) v = u(rng);
    for (std::size_t k : {2u, 5u}) {
      if (!stratification_feasible(y, k)) continue;
      for (const auto& s : kfold_splits(y, k, static_cast<std::uint64_t>(trial), true)) {
        std::set<int> present;
        for (auto i : s.test_indices) present.insert(y[i]);
        CHECK(present.size() == 3);
      }
    }
  }
}

TEST_CASE("k-fold errors and determinism") {
  const auto labels = cyclic_labels(6, 2);
  REQUIRE_ERROR(kfold_splits(labels, 1, 0, true), ErrorKind::BadK);
  REQUIRE_ERROR(kfold_splits(labels, 7, 0, true), ErrorKind::BadK);
  CHECK(kfold_splits(labels, 3, 5, true) == kfold_splits(labels, 3, 5, true));
  CHECK_FALSE(stratification_feasible(std::vector<int>{0, 0, 0, 1}, 2));
}

TEST_CASE("group splitters keep groups together") {
  const std::vector<std::string> groups = {"a", "b", "a", "c", "b", "c", "d", "a"};
  const auto logo = leave_one_group_out_splits(groups);
  REQUIRE(logo.size() == 4);
  check_partition(logo, groups.size());
  CHECK(logo[0].test_indices == std::vector<std::size_t>{0, 2, 7});
  const auto gk = group_kfold_splits(groups, 2, 1);
  check_partition(gk, groups.size());
  for (const auto& s : gk) {
    std::set<std::string> test_groups, train_groups;
    for (auto i : s.test_indices) test_groups.insert(groups[i]);
    for (auto i : s.train_indices) train_groups.insert(groups[i]);
    for (const auto& g : test_groups) CHECK(train_groups.count(g) == 0);
  }
  REQUIRE_ERROR(group_kfold_splits(groups, 5, 1), ErrorKind::BadK);
  REQUIRE_ERROR(leave_one_group_out_splits(std::vector<std::string>{"x", "x"}), ErrorKind::TooFewInstances);
}

// ---------------------------------------------------------------------------
// Cross-validation driver

TEST_CASE("oracle stub scores perfectly") {
  const auto y = cyclic_labels(30, 3);
  Matrix x(30, 2);
  for (std::size_t i = 0; i < 30; ++i) {
    x(i, 0) = y[i];
    x(i, 1) = static_cast<double>(i);
  }
  const auto splits = kfold_splits(y, 5, 1, true);
  const auto r = cross_validate(oracle_factory(), x, y, splits, CvOptions{false, 3, 1});
  CHECK(r.accuracy_mean == 1.0);
  CHECK(r.accuracy_std == 0.0);
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) CHECK(r.confusion[a][b] == (a == b ? 10u : 0u));
  }
  CHECK(r.macro_auc == 1.0);
  CHECK(r.pooled_index.size() == 30);
}

TEST_CASE("constant stub on balanced data scores one third") {
  const auto y = cyclic_labels(30, 3);
  Matrix x(30, 1, 0.0);
  for (std::size_t i = 0; i < 30; ++i) x(i, 0) = static_cast<double>(i);
  const auto r = cross_validate(constant_factory(1), x, y, loocv_splits(30), CvOptions{true, 3, 1});
  CHECK(r.accuracy_mean == Approx(1.0 / 3.0));
  std::size_t total = 0;
  for (const auto& row : r.confusion) total = std::accumulate(row.begin(), row.end(), total);
  CHECK(total == 30);
  for (double a : r.auc) CHECK(a == 0.5);
}

TEST_CASE("scaler never reads test rows") {
  std::mt19937_64 rng(12);
  auto x = respira::test::random_matrix(24, 3, rng, -5.0, 5.0);
  const auto y = cyclic_labels(24, 3);
  const auto splits = kfold_splits(y, 4, 2, true);
  const auto base = cross_validate(constant_factory(0), x, y, splits, CvOptions{true, 3, 1});
  for (auto i : splits[2].test_indices) {
    for (std::size_t j = 0; j < 3; ++j) x(i, j) = 1e6 * (j + 1);
  }
  const auto perturbed = cross_validate(constant_factory(0), x, y, splits, CvOptions{true, 3, 1});
  REQUIRE(base.folds[2].scaler.has_value());
  CHECK(*base.folds[2].scaler == *perturbed.folds[2].scaler);
}

TEST_CASE("leave-one-out 1-NN on duplicated points is perfect") {
  std::mt19937_64 rng(13);
  const auto base = respira::test::random_matrix(15, 2, rng);
  Matrix x(30, 2);
  std::vector<int> y(30);
  for (std::size_t i = 0; i < 15; ++i) {
    for (std::size_t r : {2 * i, 2 * i + 1}) {
      x(r, 0) = base(i, 0);
      x(r, 1) = base(i, 1);
      y[r] = static_cast<int>(i % 3);
    }
  }
  const auto r = cross_validate(nearest_neighbor_factory(), x, y, loocv_splits(30), CvOptions{true, 3, 1});
  CHECK(r.accuracy_mean == 1.0);
}

TEST_CASE("folds missing a class are skipped with a warning") {
  const std::vector<int> y = {0, 0, 0, 0, 1};
  Matrix x(5, 1);
  for (std::size_t i = 0; i < 5; ++i) x(i, 0) = y[i];
  const auto r = cross_validate(oracle_factory(), x, y, loocv_splits(5), CvOptions{false, 2, 1});
  CHECK(r.skipped_folds() == 1);
  CHECK(r.folds[4].skipped);
  CHECK_FALSE(r.warnings.empty());
  CHECK(r.accuracy_mean == 1.0);

  const std::vector<Split> bad = {{{0, 1, 2, 3}, {4}}};
  REQUIRE_ERROR(cross_validate(oracle_factory(), x, y, bad, CvOptions{false, 2, 1}), ErrorKind::AllFoldsSkipped);
}

TEST_CASE("permuting instances with matching splits keeps accuracy") {
  std::mt19937_64 rng(14);
  auto x = respira::test::random_matrix(30, 2, rng);
  std::vector<int> y(30);
  for (std::size_t i = 0; i < 30; ++i) y[i] = x(i, 0) > 0.0 ? (x(i, 1) > 0.0 ? 2 : 1) : 0;
  const auto splits = kfold_splits(y, 5, 3, false);
  const auto base = cross_validate(nearest_neighbor_factory(), x, y, splits, CvOptions{true, 3, 1});

  std::vector<std::size_t> perm(30);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> where(30);
  Matrix px(30, 2);
  std::vector<int> py(30);
  for (std::size_t i = 0; i < 30; ++i) {
    where[perm[i]] = i;
    px(i, 0) = x(perm[i], 0);
    px(i, 1) = x(perm[i], 1);
    py[i] = y[perm[i]];
  }
  std::vector<Split> moved;
  for (const auto& s : splits) {
    Split m;
    for (auto i : s.train_indices) m.train_indices.push_back(where[i]);
    for (auto i : s.test_indices) m.test_indices.push_back(where[i]);
    std::sort(m.train_indices.begin(), m.train_indices.end());
    std::sort(m.test_indices.begin(), m.test_indices.end());
    moved.push_back(m);
  }
  const auto permuted = cross_validate(nearest_neighbor_factory(), px, py, moved, CvOptions{true, 3, 1});
  CHECK(permuted.accuracy_mean == Approx(base.accuracy_mean).epsilon(1e-12));
}

TEST_CASE("cross-validation with real models is deterministic and thread independent") {
  std::mt19937_64 rng(15);
  auto x = respira::test::random_matrix(45, 4, rng);
  const auto y = cyclic_labels(45, 3);
  for (std::size_t i = 0; i < 45; ++i) x(i, static_cast<std::size_t>(y[i])) += 2.0;
  const auto splits = kfold_splits(y, 5, 4, true);
  for (auto kind : {ModelKind::Forest, ModelKind::Logreg, ModelKind::Svm}) {
    ModelSpec spec;
    spec.kind = kind;
    spec.seed = 21;
    spec.params.forest.n_trees = 20;
    const auto a = cross_validate(model_factory(spec), x, y, splits, CvOptions{true, 3, 1});
    const auto b = cross_validate(model_factory(spec), x, y, splits, CvOptions{true, 3, 3});
    CHECK(to_json(a).dump() == to_json(b).dump());
    CHECK(a.accuracy_mean > 0.8);
  }
}

TEST_CASE("forest grid selection runs inside each fold") {
  std::mt19937_64 rng(16);
  auto x = respira::test::random_matrix(30, 3, rng);
  const auto y = cyclic_labels(30, 3);
  for (std::size_t i = 0; i < 30; ++i) x(i, static_cast<std::size_t>(y[i])) += 3.0;
  ModelSpec spec;
  spec.seed = 2;
  ForestGrid grid;
  grid.n_trees = {5, 10};
  grid.max_depth = {2, kUnlimitedDepth};
  const auto r = cross_validate(tuned_forest_factory(spec, grid), x, y, kfold_splits(y, 3, 1, true));
  CHECK(r.accuracy_mean > 0.9);
}

// ---------------------------------------------------------------------------
// ROC

TEST_CASE("roc example with AUC 0.75") {
  const auto c = roc_curve({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1});
  CHECK(auc(c) == Approx(0.75));
  CHECK(c.points.front().fpr == 0.0);
  CHECK(c.points.front().tpr == 0.0);
  CHECK(c.points.back().fpr == 1.0);
  CHECK(c.points.back().tpr == 1.0);
}

TEST_CASE("roc of perfect and fully tied scores") {
  CHECK(auc(roc_curve({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0})) == 1.0);
  const auto tied = roc_curve({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0});
  REQUIRE(tied.points.size() == 2);
  CHECK(auc(tied) == 0.5);
  REQUIRE_ERROR(roc_curve({0.1, 0.2}, {1, 1}), ErrorKind::OneClassOnly);
  REQUIRE_ERROR(roc_curve({0.1, 0.2}, {1}), ErrorKind::DimensionMismatch);
}

TEST_CASE("auc of hand-built curves") {
  RocCurve perfect;
  perfect.points = {{0, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  CHECK(auc(perfect) == 1.0);
  RocCurve chance;
  chance.points = {{0, 0, 0}, {1, 1, 0}};
  CHECK(auc(chance) == 0.5);
}

TEST_CASE("trapezoid AUC equals the concordant-pair ratio; negation flips it") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> n_dist(2, 50);
  std::uniform_int_distribution<int> coarse(0, 5);
  std::uniform_real_distribution<double> fine(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = n_dist(rng);
    std::vector<double> s(n);
    std::vector<int> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = trial % 2 ? coarse(rng) : fine(rng);
      pos[i] = fine(rng) < 0.4;
    }
    pos[0] = 1;
    pos[1] = 0;
    const auto curve = roc_curve(s, pos);
    const double a = auc(curve);
    CHECK(std::abs(a - pairwise_auc(s, pos)) <= 1e-9);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
      CHECK(curve.points[i].fpr >= curve.points[i - 1].fpr);
      CHECK(curve.points[i].tpr >= curve.points[i - 1].tpr);
    }
    std::vector<double> neg(n);
    for (std::size_t i = 0; i < n; ++i) neg[i] = -s[i];
    CHECK(std::abs(auc(roc_curve(neg, pos)) - (1.0 - a)) <= 1e-9);
  }
}

TEST_CASE("one-vs-rest ROC") {
  const std::vector<int> labels = {0, 1, 2, 0, 1, 2};
  Matrix perfect(6, 3, 0.0), uniform(6, 3, 1.0 / 3.0);
  for (std::size_t i = 0; i < 6; ++i) perfect(i, static_cast<std::size_t>(labels[i])) = 1.0;
  const auto p = ovr_roc(perfect, labels);
  REQUIRE(p.curves.size() == 3);
  for (double a : p.aucs) CHECK(a == 1.0);
  CHECK(p.macro_auc == 1.0);
  const auto u = ovr_roc(uniform, labels);
  for (double a : u.aucs) CHECK(a == 0.5);
  CHECK(u.macro_auc == 0.5);
  REQUIRE_ERROR(ovr_roc(Matrix(2, 3, 0.0), std::vector<int>{0, 1}), ErrorKind::OneClassOnly);
}

TEST_CASE("cross-validation report serializes undefined AUC as null") {
  const std::vector<int> y = {0, 1, 0, 1};
  Matrix x(4, 1);
  for (std::size_t i = 0; i < 4; ++i) x(i, 0) = y[i];
  const auto r = cross_validate(oracle_factory(), x, y, loocv_splits(4), CvOptions{false, 3, 1});
  const auto j = to_json(r);
  CHECK(j["auc"]["deep"].is_null());
  CHECK(j["macro_auc"] == 1.0);
  CHECK(j["n_folds"] == 4);
}
