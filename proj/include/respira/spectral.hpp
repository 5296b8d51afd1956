#pragma once

// Radix-2 FFT, Hann periodogram and breathing-rate estimation by spectral
// peak picking.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "respira/dataset.hpp"
#include "respira/error.hpp"

namespace respira {

/// Iterative Cooley-Tukey transform. Forward: X_k = sum x_n e^{-2 pi i kn/N}.
/// Inverse is scaled by 1/N.
template <std::floating_point T>
std::vector<std::complex<T>> fft_radix2(std::span<const std::complex<T>> input, bool inverse = false) {
  const std::size_t n = input.size();
  if (n == 0 || !std::has_single_bit(n)) {
    fail(ErrorKind::NonPowerOfTwoLength, "length " + std::to_string(n));
  }
  std::vector<std::complex<T>> a(input.begin(), input.end());
  if (n == 1) return a;

  // Bit-reversal permutation with an incrementally reversed counter.
  for (std::size_t i = 1, rev = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; rev & bit; bit >>= 1) rev ^= bit;
    rev ^= bit;
    if (i < rev) std::swap(a[i], a[rev]);
  }

  // Twiddles for the largest stage, cached per thread for the last (n,
  // direction); smaller stages use a stride into it.
  thread_local std::vector<std::complex<T>> twiddle;
  thread_local std::size_t cached_n = 0;
  thread_local bool cached_inverse = false;
  if (cached_n != n || cached_inverse != inverse) {
    const T sign = inverse ? T(1) : T(-1);
    twiddle.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      const T angle = sign * T(2) * std::numbers::pi_v<T> * static_cast<T>(k) / static_cast<T>(n);
      twiddle[k] = {std::cos(angle), std::sin(angle)};
    }
    cached_n = n;
    cached_inverse = inverse;
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        // Plain complex product: operands are finite, so the C99 Annex G
        // NaN recovery done by operator* is not needed.
        const auto w = twiddle[k * stride];
        const auto v = a[start + k + half];
        const std::complex<T> t(w.real() * v.real() - w.imag() * v.imag(),
                                w.real() * v.imag() + w.imag() * v.real());
        const auto u = a[start + k];
        a[start + k] = u + t;
        a[start + k + half] = u - t;
      }
    }
  }

  if (inverse) {
    const T scale = T(1) / static_cast<T>(n);
    for (auto& v : a) v *= scale;
  }
  return a;
}

template <std::floating_point T>
std::vector<std::complex<T>> fft_radix2(const std::vector<std::complex<T>>& input, bool inverse = false) {
  return fft_radix2(std::span<const std::complex<T>>(input), inverse);
}

struct Spectrum {
  std::vector<double> freqs;  // Hz, 0 .. fs/2
  std::vector<double> power;  // one-sided power spectral density
  std::size_t n_fft = 0;
  double fs = 0.0;

  double bin_width() const noexcept { return fs / static_cast<double>(n_fft); }
  friend bool operator==(const Spectrum&, const Spectrum&) = default;
};

inline constexpr std::size_t kMinSpectralSamples = 16;
inline constexpr std::size_t kZeroPadFactor = 4;

/// Periodic Hann taper of length n.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

/// Mean-detrended, Hann-tapered periodogram zero-padded to the next power of
/// two at or above 4n. power_k = |X_k|^2 / (fs * sum w^2), interior bins
/// doubled so the one-sided density integrates to the tapered variance.
inline Spectrum periodogram(std::span<const double> signal, double fs) {
  const std::size_t n = signal.size();
  if (n < kMinSpectralSamples) fail(ErrorKind::TooShort, std::to_string(n) + " samples");
  if (!(fs > 0.0)) fail(ErrorKind::InvalidParams, "fs must be positive");
  double mean = 0.0;
  for (double v : signal) {
    if (!std::isfinite(v)) fail(ErrorKind::NonFiniteInput, "periodogram input");
    mean += v;
  }
  mean /= static_cast<double>(n);

  const auto window = hann_window(n);
  double energy = 0.0;
  for (double w : window) energy += w * w;

  const std::size_t n_fft = std::bit_ceil(kZeroPadFactor * n);
  std::vector<std::complex<double>> buf(n_fft);
  for (std::size_t i = 0; i < n; ++i) buf[i] = (signal[i] - mean) * window[i];
  const auto spec = fft_radix2<double>(buf);

  Spectrum out;
  out.n_fft = n_fft;
  out.fs = fs;
  const std::size_t bins = n_fft / 2 + 1;
  out.freqs.resize(bins);
  out.power.resize(bins);
  const double norm = 1.0 / (fs * energy);
  for (std::size_t k = 0; k < bins; ++k) {
    out.freqs[k] = static_cast<double>(k) * fs / static_cast<double>(n_fft);
    double p = std::norm(spec[k]) * norm;
    if (k != 0 && k != n_fft / 2) p *= 2.0;
    out.power[k] = p;
  }
  return out;
}

inline void write_spectrum_csv(const Spectrum& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot open " + path.string());
  out << "freq_hz,power\n";
  for (std::size_t k = 0; k < s.freqs.size(); ++k) {
    out << detail::format_double(s.freqs[k]) << ',' << detail::format_double(s.power[k]) << '\n';
  }
  if (!out) fail(ErrorKind::IoFailure, "write failed for " + path.string());
}

struct FrequencyBand {
  double lo_hz = 0.05;
  double hi_hz = 3.0;
  friend bool operator==(const FrequencyBand&, const FrequencyBand&) = default;
};

struct BrEstimate {
  double bpm = 0.0;
  double peak_freq_hz = 0.0;
  double peak_power = 0.0;
  FrequencyBand band;
};

/// Dominant in-band periodogram peak, refined by a parabola through the log
/// power of the peak bin and its two neighbours.
inline BrEstimate estimate_breathing_rate(std::span<const double> signal, double fs, FrequencyBand band = {}) {
  if (!(band.lo_hz > 0.0 && band.lo_hz < band.hi_hz && band.hi_hz < fs / 2.0)) {
    fail(ErrorKind::InvalidParams, "band must satisfy 0 < lo < hi < fs/2");
  }
  const Spectrum s = periodogram(signal, fs);

  std::size_t peak = s.freqs.size();
  for (std::size_t k = 0; k < s.freqs.size(); ++k) {
    if (s.freqs[k] < band.lo_hz || s.freqs[k] > band.hi_hz) continue;
    if (peak == s.freqs.size() || s.power[k] > s.power[peak]) peak = k;
  }
  if (peak == s.freqs.size()) fail(ErrorKind::EmptyBand, "no spectral bins inside band");

  double offset = 0.0;
  if (peak > 0 && peak + 1 < s.power.size()) {
    const double a = s.power[peak - 1];
    const double b = s.power[peak];
    const double c = s.power[peak + 1];
    if (a > 0.0 && b > 0.0 && c > 0.0) {
      const double la = std::log(a), lb = std::log(b), lc = std::log(c);
      const double denom = la - 2.0 * lb + lc;
      if (denom < 0.0) offset = std::clamp(0.5 * (la - lc) / denom, -0.5, 0.5);
    }
  }

  BrEstimate e;
  e.band = band;
  e.peak_power = s.power[peak];
  e.peak_freq_hz = std::clamp((static_cast<double>(peak) + offset) * s.bin_width(), band.lo_hz, band.hi_hz);
  e.bpm = 60.0 * e.peak_freq_hz;
  return e;
}

struct BrConsensus {
  BrEstimate pressure;
  BrEstimate flow;
  BrEstimate tidal_volume;
  double consensus_bpm = 0.0;
  double max_pairwise_diff_bpm = 0.0;
};

/// Per-channel estimates over pressure, flow and tidal volume; consensus is
/// their median.
inline BrConsensus br_consensus(const TrialRecord& r, FrequencyBand band = {}) {
  BrConsensus c;
  const double fs = r.meta.nominal_fs;
  c.pressure = estimate_breathing_rate(r.pressure, fs, band);
  c.flow = estimate_breathing_rate(r.flow, fs, band);
  c.tidal_volume = estimate_breathing_rate(r.tidal_volume, fs, band);
  std::array<double, 3> bpm = {c.pressure.bpm, c.flow.bpm, c.tidal_volume.bpm};
  std::sort(bpm.begin(), bpm.end());
  c.consensus_bpm = bpm[1];
  c.max_pairwise_diff_bpm = bpm[2] - bpm[0];
  return c;
}

}  // namespace respira
