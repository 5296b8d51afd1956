#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "respira/dataset.hpp"
#include "respira/spectral.hpp"
#include "test_support.hpp"

using namespace respira;
using cd = std::complex<double>;

namespace {

std::vector<cd> random_complex(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<cd> v(n);
  for (auto& z : v) z = {g(rng), g(rng)};
  return v;
}

std::vector<cd> naive_dft(const std::vector<cd>& x) {
  const std::size_t n = x.size();
  std::vector<cd> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cd acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n);
      acc += x[t] * cd(std::cos(angle), std::sin(angle));
    }
    out[k] = acc;
  }
  return out;
}

double max_abs_diff(const std::vector<cd>& a, const std::vector<cd>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

std::vector<double> sinusoid(double f, double seconds, double fs, double phase = 0.0) {
  const auto n = static_cast<std::size_t>(std::llround(seconds * fs));
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs + phase);
  return x;
}

SubjectMeta subject() {
  SubjectMeta s;
  s.subject_id = "S02";
  s.age = 22;
  s.height_cm = 165;
  s.weight_kg = 60;
  return s;
}

}  // namespace

TEST_CASE("fft of an impulse is flat and of a constant is DC only") {
  const auto impulse = fft_radix2<double>(std::vector<cd>{1, 0, 0, 0});
  for (const auto& v : impulse) CHECK(std::abs(v - cd(1, 0)) < 1e-15);
  const auto constant = fft_radix2<double>(std::vector<cd>{1, 1, 1, 1});
  CHECK(std::abs(constant[0] - cd(4, 0)) < 1e-15);
  for (std::size_t k = 1; k < 4; ++k) CHECK(std::abs(constant[k]) < 1e-15);
}

TEST_CASE("fft matches a direct DFT") {
  std::mt19937_64 rng(5);
  for (std::size_t n : {1u, 2u, 8u, 32u, 256u}) {
    const auto x = random_complex(n, rng);
    CHECK(max_abs_diff(fft_radix2<double>(x), naive_dft(x)) < 1e-9);
  }
}

TEST_CASE("inverse fft undoes the forward transform") {
  std::mt19937_64 rng(6);
  // Alternate sizes and directions so the per-thread twiddle cache is exercised.
  for (std::size_t n : {64u, 16u, 64u, 1024u, 64u}) {
    const auto x = random_complex(n, rng);
    const auto back = fft_radix2<double>(fft_radix2<double>(x), true);
    CHECK(max_abs_diff(back, x) < 1e-12);
  }
}

TEST_CASE("fft is linear") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_complex(128, rng);
    const auto y = random_complex(128, rng);
    const cd a(0.7, -1.3), b(-2.1, 0.4);
    std::vector<cd> mix(128);
    for (std::size_t i = 0; i < 128; ++i) mix[i] = a * x[i] + b * y[i];
    const auto fx = fft_radix2<double>(x), fy = fft_radix2<double>(y), fm = fft_radix2<double>(mix);
    std::vector<cd> expected(128);
    for (std::size_t i = 0; i < 128; ++i) expected[i] = a * fx[i] + b * fy[i];
    CHECK(max_abs_diff(fm, expected) < 1e-10);
  }
}

TEST_CASE("fft rejects lengths that are not powers of two") {
  REQUIRE_ERROR(fft_radix2<double>(std::vector<cd>(6)), ErrorKind::NonPowerOfTwoLength);
  REQUIRE_ERROR(fft_radix2<double>(std::vector<cd>{}), ErrorKind::NonPowerOfTwoLength);
}

TEST_CASE("periodogram grid and peak location") {
  const auto x = sinusoid(0.25, 60.0, 100.0);
  const auto s = periodogram(x, 100.0);
  REQUIRE(s.freqs.size() == s.n_fft / 2 + 1);
  CHECK(s.n_fft == 32768);
  CHECK(s.freqs.front() == 0.0);
  CHECK(s.freqs.back() == 50.0);
  for (std::size_t k = 1; k < s.freqs.size(); ++k) REQUIRE(s.freqs[k] > s.freqs[k - 1]);
  for (double p : s.power) REQUIRE(p >= 0.0);
  const auto peak = std::max_element(s.power.begin(), s.power.end()) - s.power.begin();
  CHECK(std::abs(s.freqs[static_cast<std::size_t>(peak)] - 0.25) <= s.bin_width());
}

TEST_CASE("periodogram of a constant is empty after detrending") {
  const std::vector<double> x(1000, 3.7);
  for (double p : periodogram(x, 100.0).power) CHECK(p <= 1e-20);
}

TEST_CASE("periodogram is deterministic") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(777);
  for (auto& v : x) v = g(rng);
  CHECK(periodogram(x, 50.0) == periodogram(x, 50.0));
}

TEST_CASE("one-sided power integrates to the tapered variance") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t n : {100u, 513u, 2000u}) {
    std::vector<double> x(n);
    for (auto& v : x) v = 4.0 + 2.0 * g(rng);
    const auto s = periodogram(x, 25.0);
    double integral = 0.0;
    for (double p : s.power) integral += p * s.bin_width();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    const auto w = hann_window(n);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      num += (x[i] - mean) * (x[i] - mean) * w[i] * w[i];
      den += w[i] * w[i];
    }
    CHECK(std::abs(integral - num / den) <= 0.05 * (num / den));
  }
}

TEST_CASE("periodogram input errors") {
  REQUIRE_ERROR(periodogram(std::vector<double>(15, 1.0), 100.0), ErrorKind::TooShort);
  auto x = sinusoid(1.0, 1.0, 100.0);
  x[3] = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_ERROR(periodogram(x, 100.0), ErrorKind::NonFiniteInput);
}

TEST_CASE("breathing rate of noiseless sinusoids") {
  CHECK(std::abs(estimate_breathing_rate(sinusoid(0.25, 60.0, 100.0), 100.0).bpm - 15.0) <= 0.2);
  CHECK(std::abs(estimate_breathing_rate(sinusoid(1.5, 60.0, 100.0), 100.0).bpm - 90.0) <= 0.2);
  for (double f = 0.10; f <= 2.5 + 1e-9; f += 0.05) {
    const auto e = estimate_breathing_rate(sinusoid(f, 60.0, 100.0, 0.3), 100.0);
    CHECK(std::abs(e.bpm - 60.0 * f) <= 0.2);
    CHECK(e.bpm == 60.0 * e.peak_freq_hz);
    CHECK(e.peak_freq_hz >= e.band.lo_hz);
    CHECK(e.peak_freq_hz <= e.band.hi_hz);
  }
}

TEST_CASE("breathing rate at 10 dB SNR") {
  std::mt19937_64 rng(10);
  const auto clean = sinusoid(0.2, 60.0, 100.0);
  // Signal power of a unit sinusoid is 1/2; 10 dB below that is 0.05.
  std::normal_distribution<double> noise(0.0, std::sqrt(0.05));
  for (int trial = 0; trial < 5; ++trial) {
    auto x = clean;
    for (auto& v : x) v += noise(rng);
    CHECK(std::abs(estimate_breathing_rate(x, 100.0).bpm - 12.0) <= 0.5);
  }
}

TEST_CASE("breathing rate band errors") {
  const auto x = sinusoid(0.25, 60.0, 100.0);
  REQUIRE_ERROR(estimate_breathing_rate(x, 100.0, {0.5, 0.2}), ErrorKind::InvalidParams);
  REQUIRE_ERROR(estimate_breathing_rate(x, 100.0, {0.0, 3.0}), ErrorKind::InvalidParams);
  REQUIRE_ERROR(estimate_breathing_rate(x, 100.0, {0.1, 60.0}), ErrorKind::InvalidParams);
  // A band narrower than one bin holds no grid frequency.
  REQUIRE_ERROR(estimate_breathing_rate(x, 100.0, {0.2501, 0.2502}), ErrorKind::EmptyBand);
}

TEST_CASE("channel consensus on synthetic trials") {
  SyntheticSpec spec;  // 0.25 Hz
  const auto r = generate_synthetic_trial(spec, BreathingType::Normal, subject());
  const auto c = br_consensus(r);
  CHECK(std::abs(c.pressure.bpm - 15.0) <= 0.2);
  CHECK(std::abs(c.flow.bpm - 15.0) <= 0.2);
  CHECK(std::abs(c.tidal_volume.bpm - 15.0) <= 0.2);
  CHECK(std::abs(c.consensus_bpm - 15.0) <= 0.2);

  spec.noise_std_fraction = 0.1;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    spec.seed = seed;
    const auto noisy = br_consensus(generate_synthetic_trial(spec, BreathingType::Normal, subject()));
    CHECK(noisy.max_pairwise_diff_bpm <= 1.0);
  }
}

TEST_CASE("channel consensus takes the median and rejects NaN") {
  auto r = generate_synthetic_trial(SyntheticSpec{}, BreathingType::Normal, subject());
  const auto c = br_consensus(r);
  std::vector<double> v = {c.pressure.bpm, c.flow.bpm, c.tidal_volume.bpm};
  std::sort(v.begin(), v.end());
  CHECK(c.consensus_bpm == v[1]);
  CHECK(c.max_pairwise_diff_bpm == v[2] - v[0]);
  r.pressure[100] = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_ERROR(br_consensus(r), ErrorKind::NonFiniteInput);
}
