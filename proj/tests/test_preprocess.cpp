#include <cmath>
#include <limits>
#include <random>

#include "respira/dataset.hpp"
#include "respira/preprocess.hpp"
#include "test_support.hpp"

using namespace respira;
using Catch::Approx;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SubjectMeta subject() {
  SubjectMeta s;
  s.subject_id = "S07";
  s.age = 30;
  s.height_cm = 180;
  s.weight_kg = 80;
  return s;
}

TrialRecord five_rows() {
  TrialRecord r;
  r.meta.subject = subject();
  r.meta.nominal_fs = 100.0;
  for (int i = 0; i < 5; ++i) {
    r.time.push_back(i * 0.01);
    r.pressure.push_back(5.0 + i);
    r.flow.push_back(0.1 * i);
    r.tidal_volume.push_back(0.01 * i);
    r.chest_circ.push_back(900.0 + i);
    r.abdomen_circ.push_back(850.0 + i);
  }
  r.insp_starts = {0, 1, 4};
  return r;
}

TrialRecord trial(BreathingType type, double duration_s) {
  SyntheticSpec spec = default_synthetic_spec(type);
  spec.duration_s = duration_s;
  return generate_synthetic_trial(spec, type, subject());
}

}  // namespace

TEST_CASE("drop_nan_rows removes rows with any NaN") {
  auto r = five_rows();
  r.flow[1] = kNaN;
  r.flow[3] = kNaN;
  const auto out = drop_nan_rows(r);
  REQUIRE(out.size() == 3);
  CHECK(out.time == std::vector<double>{0.0, 0.02, 0.04});
  CHECK(out.pressure == std::vector<double>{5.0, 7.0, 9.0});
  // The marker on dropped row 1 is discarded; survivors are re-indexed.
  CHECK(out.insp_starts == std::vector<std::size_t>{0, 2});
  CHECK(out.meta == r.meta);
}

TEST_CASE("drop_nan_rows leaves a clean record unchanged") {
  const auto r = five_rows();
  CHECK(drop_nan_rows(r) == r);
}

TEST_CASE("drop_nan_rows on an all-NaN record fails") {
  auto r = five_rows();
  for (auto& v : r.abdomen_circ) v = kNaN;
  REQUIRE_ERROR(drop_nan_rows(r), ErrorKind::AllRowsDropped);
}

TEST_CASE("drop_nan_rows output is a NaN-free subsequence") {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution corrupt(0.2);
  auto r = trial(BreathingType::Normal, 5.0);
  for (auto* ch : {&r.pressure, &r.flow, &r.tidal_volume, &r.chest_circ, &r.abdomen_circ}) {
    for (auto& v : *ch) {
      if (corrupt(rng)) v = kNaN;
    }
  }
  const auto out = drop_nan_rows(r);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (auto* ch : {&out.pressure, &out.flow, &out.tidal_volume, &out.chest_circ, &out.abdomen_circ}) {
      REQUIRE(std::isfinite((*ch)[i]));
    }
    while (cursor < r.size() && r.time[cursor] != out.time[i]) ++cursor;
    REQUIRE(cursor < r.size());
    CHECK(r.flow[cursor] == out.flow[i]);
  }
}

TEST_CASE("zscore of [1,2,3]") {
  const auto x = Matrix::from_rows({{1.0}, {2.0}, {3.0}});
  const auto p = zscore_fit(x);
  CHECK(p.mean[0] == Approx(2.0));
  CHECK(p.std[0] == Approx(0.816497).margin(1e-6));
  const auto z = zscore_apply(p, x);
  CHECK(z(0, 0) == Approx(-1.224745).margin(1e-6));
  CHECK(z(1, 0) == Approx(0.0).margin(1e-12));
  CHECK(z(2, 0) == Approx(1.224745).margin(1e-6));
}

TEST_CASE("zscore guards constant columns and single rows") {
  const auto constant = Matrix::from_rows({{5.0}, {5.0}, {5.0}});
  const auto p = zscore_fit(constant);
  CHECK(p.mean[0] == 5.0);
  CHECK(p.std[0] == 1.0);
  const auto one = Matrix::from_rows({{3.0, -7.0}});
  const auto q = zscore_fit(one);
  CHECK(q.std == std::vector<double>{1.0, 1.0});
  const auto z = zscore_apply(q, one);
  CHECK(z(0, 0) == 0.0);
  CHECK(z(0, 1) == 0.0);
}

TEST_CASE("zscore standardizes random matrices") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = respira::test::random_matrix(40, 6, rng, -50.0, 300.0);
    const auto z = zscore_apply(zscore_fit(x), x);
    for (std::size_t j = 0; j < z.cols(); ++j) {
      double mean = 0.0, var = 0.0;
      for (std::size_t i = 0; i < z.rows(); ++i) mean += z(i, j);
      mean /= static_cast<double>(z.rows());
      for (std::size_t i = 0; i < z.rows(); ++i) var += (z(i, j) - mean) * (z(i, j) - mean);
      CHECK(std::abs(mean) <= 1e-9);
      CHECK(std::abs(std::sqrt(var / static_cast<double>(z.rows())) - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("zscore errors") {
  const auto p = zscore_fit(Matrix::from_rows({{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}}));
  REQUIRE_ERROR(zscore_apply(p, Matrix::from_rows({{1.0, 2.0}})), ErrorKind::DimensionMismatch);
  REQUIRE_ERROR(zscore_fit(Matrix()), ErrorKind::EmptyMatrix);
}

TEST_CASE("refitting on train plus a shifted test set changes the scaler") {
  const auto train = Matrix::from_rows({{1.0}, {2.0}, {3.0}});
  const auto all = Matrix::from_rows({{1.0}, {2.0}, {3.0}, {40.0}});
  CHECK_FALSE(zscore_fit(train) == zscore_fit(all));
}

TEST_CASE("window counts for 65 s and 35 s trials") {
  const auto normal = trial(BreathingType::Normal, 65.0);
  const auto panting = trial(BreathingType::Panting, 35.0);
  CHECK(segment_windows(normal, 10.0, 0.5).size() == 12);
  CHECK(segment_windows(panting, 10.0, 0.5).size() == 6);
}

TEST_CASE("windows tile the trial at a fixed stride") {
  const auto r = trial(BreathingType::Deep, 65.0);
  const auto windows = segment_windows(r, 8.0, 0.25);
  REQUIRE(windows.size() >= 2);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& win = windows[w];
    CHECK(win.length == 800);
    CHECK(win.start_index == w * 600);
    CHECK(win.start_index + win.length <= r.size());
    CHECK(win.label == BreathingType::Deep);
    CHECK(win.subject_id == "S07");
    CHECK(win.tidal_volume.front() == r.tidal_volume[win.start_index]);
    CHECK(win.abdomen_circ.back() == r.abdomen_circ[win.start_index + win.length - 1]);
  }
}

TEST_CASE("window parameter errors and short trials") {
  const auto r = trial(BreathingType::Normal, 65.0);
  REQUIRE_ERROR(segment_windows(r, 10.0, 1.0), ErrorKind::InvalidOverlap);
  REQUIRE_ERROR(segment_windows(r, 10.0, -0.1), ErrorKind::InvalidOverlap);
  REQUIRE_ERROR(segment_windows(r, 0.0, 0.5), ErrorKind::InvalidParams);
  CHECK(segment_windows(trial(BreathingType::Normal, 9.0), 10.0, 0.5).empty());
  auto dirty = r;
  dirty.flow[10] = kNaN;
  REQUIRE_ERROR(segment_windows(dirty, 10.0, 0.5), ErrorKind::NonFiniteInput);
}
