#include <cmath>
#include <random>

#include "respira/dataset.hpp"
#include "respira/features.hpp"
#include "respira/preprocess.hpp"
#include "test_support.hpp"

using namespace respira;
using Catch::Approx;

namespace {

Window constant_window(double c, std::size_t n = 50) {
  Window w;
  w.fs = 100.0;
  w.length = n;
  w.pressure = w.flow = w.tidal_volume = w.chest_circ = w.abdomen_circ = std::vector<double>(n, c);
  return w;
}

SubjectMeta subject(const std::string& id) {
  SubjectMeta s;
  s.subject_id = id;
  s.age = 40;
  s.height_cm = 175;
  s.weight_kg = 70;
  return s;
}

std::vector<Window> trial_windows(double f, BreathingType type = BreathingType::Normal,
                                  const std::string& id = "S01") {
  SyntheticSpec spec = default_synthetic_spec(type);
  spec.breathing_frequency_hz = f;
  spec.duration_s = 65.0;
  return segment_windows(generate_synthetic_trial(spec, type, subject(id)), 10.0, 0.5);
}

}  // namespace

TEST_CASE("feature names") {
  const auto names = feature_names(false);
  REQUIRE(names.size() == 25);
  CHECK(names.front() == "pressure_mean");
  CHECK(names[9] == "flow_rms");
  CHECK(names.back() == "abdomen_circ_rms");
  const auto with_br = feature_names(true);
  REQUIRE(with_br.size() == 26);
  CHECK(with_br.back() == "br_bpm");
}

TEST_CASE("statistics of a constant window") {
  for (double c : {2.5, -3.0}) {
    const auto f = window_features(constant_window(c));
    REQUIRE(f.size() == 25);
    for (std::size_t ch = 0; ch < 5; ++ch) {
      CHECK(f[ch * 5 + 0] == Approx(c));
      CHECK(f[ch * 5 + 1] == Approx(0.0).margin(1e-12));
      CHECK(f[ch * 5 + 2] == c);
      CHECK(f[ch * 5 + 3] == c);
      CHECK(f[ch * 5 + 4] == Approx(std::abs(c)));
    }
  }
}

TEST_CASE("statistics of the slice [-1, 1]") {
  const std::vector<double> x = {-1.0, 1.0};
  const auto s = channel_statistics(x);
  CHECK(s[0] == 0.0);
  CHECK(s[1] == 1.0);
  CHECK(s[2] == -1.0);
  CHECK(s[3] == 1.0);
  CHECK(s[4] == 1.0);
}

TEST_CASE("identical windows give identical features") {
  const auto windows = trial_windows(0.25);
  auto copy = windows[3];
  CHECK(window_features(copy) == window_features(windows[3]));
}

TEST_CASE("window with an empty channel is rejected") {
  auto w = constant_window(1.0);
  w.flow.clear();
  REQUIRE_ERROR(window_features(w), ErrorKind::EmptyInput);
}

TEST_CASE("matrix shapes with and without BR") {
  const auto windows = trial_windows(0.25);
  REQUIRE(windows.size() == 12);
  const auto plain = assemble_matrix(windows, false);
  CHECK(plain.rows() == 12);
  CHECK(plain.cols() == 25);
  CHECK_FALSE(plain.includes_br);
  const auto with_br = assemble_matrix(windows, true);
  CHECK(with_br.rows() == 12);
  CHECK(with_br.cols() == 26);
  CHECK(with_br.feature_names.size() == 26);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(std::abs(with_br.values(i, 25) - 15.0) <= 0.5);
    CHECK(with_br.labels[i] == 0);
    CHECK(with_br.group_ids[i] == "S01");
    CHECK(with_br.trial_ids[i] == "S01_normal");
  }
  CHECK(without_br(with_br).values == plain.values);
  CHECK(without_br(with_br).feature_names == plain.feature_names);
}

TEST_CASE("empty window list is rejected") {
  REQUIRE_ERROR(assemble_matrix(std::vector<Window>{}, true), ErrorKind::EmptyInput);
}

TEST_CASE("BR column tracks the generator frequency on windows holding two or more cycles") {
  for (double f : {0.2, 0.3, 0.5, 1.0, 1.5, 2.0}) {
    const auto m = assemble_matrix(trial_windows(f), true);
    // 0.2 Hz puts exactly two cycles in a 10 s window, on the flagging boundary.
    if (f > 0.2) CHECK(m.short_cycle_rows.empty());
    for (std::size_t i = 0; i < m.rows(); ++i) CHECK(std::abs(m.values(i, 25) - 60.0 * f) <= 0.5);
  }
}

TEST_CASE("deep breathing windows under two cycles are flagged") {
  const auto m = assemble_matrix(trial_windows(0.15, BreathingType::Deep), true);
  CHECK(m.short_cycle_rows.size() == m.rows());
}

TEST_CASE("BR channel selection") {
  const auto windows = trial_windows(0.25);
  for (auto ch : {BrChannel::Pressure, BrChannel::Flow, BrChannel::TidalVolume}) {
    const auto m = assemble_matrix(windows, true, {}, ch);
    for (std::size_t i = 0; i < m.rows(); ++i) CHECK(std::abs(m.values(i, 25) - 15.0) <= 0.5);
  }
  CHECK(parse_br_channel("flow") == BrChannel::Flow);
  CHECK_FALSE(parse_br_channel("chest").has_value());
}

TEST_CASE("permuting windows permutes rows and threads do not matter") {
  auto windows = trial_windows(0.25);
  const auto more = trial_windows(1.5, BreathingType::Panting, "S02");
  windows.insert(windows.end(), more.begin(), more.end());
  const auto base = assemble_matrix(windows, true, {}, BrChannel::TidalVolume, 1);
  CHECK(assemble_matrix(windows, true, {}, BrChannel::TidalVolume, 4).values == base.values);

  std::vector<std::size_t> perm(windows.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(1);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Window> shuffled;
  for (auto p : perm) shuffled.push_back(windows[p]);
  const auto m = assemble_matrix(shuffled, true);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    CHECK(std::equal(m.values.row(i).begin(), m.values.row(i).end(), base.values.row(perm[i]).begin()));
    CHECK(m.labels[i] == base.labels[perm[i]]);
  }
}

TEST_CASE("feature CSV layout") {
  respira::test::TempDir dir("features");
  const auto m = assemble_matrix(trial_windows(0.25), true);
  write_feature_csv(m, dir / "f.csv");
  const auto text = respira::test::read_text(dir / "f.csv");
  const auto header = text.substr(0, text.find('\n'));
  CHECK(header.starts_with("pressure_mean,"));
  CHECK(header.ends_with("br_bpm,label,group_id,trial_id"));
  CHECK(std::count(text.begin(), text.end(), '\n') == 13);
}
