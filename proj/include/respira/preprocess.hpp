#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "respira/dataset.hpp"
#include "respira/error.hpp"
#include "respira/matrix.hpp"

namespace respira {

/// Keeps only rows where time and every channel are finite. Markers on
/// dropped rows are discarded; surviving markers are re-indexed.
inline TrialRecord drop_nan_rows(const TrialRecord& in) {
  TrialRecord out;
  out.meta = in.meta;
  const std::size_t n = in.size();
  std::size_t marker = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool is_start = marker < in.insp_starts.size() && in.insp_starts[marker] == i;
    if (is_start) ++marker;
    const bool finite = std::isfinite(in.time[i]) && std::isfinite(in.pressure[i]) &&
                        std::isfinite(in.flow[i]) && std::isfinite(in.tidal_volume[i]) &&
                        std::isfinite(in.chest_circ[i]) && std::isfinite(in.abdomen_circ[i]);
    if (!finite) continue;
    if (is_start) out.insp_starts.push_back(out.time.size());
    out.time.push_back(in.time[i]);
    out.pressure.push_back(in.pressure[i]);
    out.flow.push_back(in.flow[i]);
    out.tidal_volume.push_back(in.tidal_volume[i]);
    out.chest_circ.push_back(in.chest_circ[i]);
    out.abdomen_circ.push_back(in.abdomen_circ[i]);
  }
  if (out.size() < 2) {
    fail(ErrorKind::AllRowsDropped, in.meta.trial_id() + ": " + std::to_string(out.size()) + " rows survive");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Standardization

struct ScalerParams {
  std::vector<double> mean;
  std::vector<double> std;  // population convention; degenerate columns stored as 1

  std::size_t dimension() const noexcept { return mean.size(); }
  friend bool operator==(const ScalerParams&, const ScalerParams&) = default;
};

inline constexpr double kConstantColumnStd = 1e-12;

inline ScalerParams zscore_fit(const Matrix& x) {
  if (x.rows() == 0 || x.cols() == 0) fail(ErrorKind::EmptyMatrix, "cannot fit scaler on empty matrix");
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  ScalerParams p{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    auto row = x.row(i);
    for (std::size_t j = 0; j < d; ++j) p.mean[j] += row[j];
  }
  for (auto& m : p.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = x.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = row[j] - p.mean[j];
      p.std[j] += dev * dev;
    }
  }
  for (auto& s : p.std) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s < kConstantColumnStd) s = 1.0;
  }
  return p;
}

inline Matrix zscore_apply(const ScalerParams& p, const Matrix& x) {
  if (x.cols() != p.dimension()) {
    fail(ErrorKind::DimensionMismatch, "scaler fitted on " + std::to_string(p.dimension()) +
                                           " columns, got " + std::to_string(x.cols()));
  }
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto src = x.row(i);
    auto dst = out.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) dst[j] = (src[j] - p.mean[j]) / p.std[j];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Windowing

/// A fixed-length slice of a cleaned trial, copied out of the record.
struct Window {
  std::string subject_id;
  std::string trial_id;
  BreathingType label = BreathingType::Normal;
  double fs = 0.0;
  std::size_t start_index = 0;
  std::size_t length = 0;
  std::vector<double> pressure;
  std::vector<double> flow;
  std::vector<double> tidal_volume;
  std::vector<double> chest_circ;
  std::vector<double> abdomen_circ;

  friend bool operator==(const Window&, const Window&) = default;
};

struct WindowParams {
  double window_s = 10.0;
  double overlap_fraction = 0.5;
};

/// Window length and stride in samples for a given sampling rate.
inline std::pair<std::size_t, std::size_t> window_geometry(const WindowParams& wp, double fs) {
  if (!(wp.overlap_fraction >= 0.0 && wp.overlap_fraction < 1.0)) {
    fail(ErrorKind::InvalidOverlap, "overlap must lie in [0, 1), got " + std::to_string(wp.overlap_fraction));
  }
  const auto length = std::llround(wp.window_s * fs);
  if (!(wp.window_s > 0.0) || length < 2) {
    fail(ErrorKind::InvalidParams, "window must span at least 2 samples");
  }
  const auto stride = std::max<long long>(1, std::llround(static_cast<double>(length) * (1.0 - wp.overlap_fraction)));
  return {static_cast<std::size_t>(length), static_cast<std::size_t>(stride)};
}

/// Cuts windows at a fixed stride. A trial shorter than one window yields an
/// empty list; callers report it.
inline std::vector<Window> segment_windows(const TrialRecord& r, const WindowParams& wp) {
  const auto [length, stride] = window_geometry(wp, r.meta.nominal_fs);
  std::vector<Window> out;
  const std::size_t n = r.size();
  for (const auto* ch : {&r.pressure, &r.flow, &r.tidal_volume, &r.chest_circ, &r.abdomen_circ}) {
    if (!std::all_of(ch->begin(), ch->end(), [](double v) { return std::isfinite(v); })) {
      fail(ErrorKind::NonFiniteInput, r.meta.trial_id() + " must be cleaned before windowing");
    }
  }
  if (n < length) return out;
  const std::size_t count = (n - length) / stride + 1;
  out.reserve(count);
  auto slice = [&](const std::vector<double>& ch, std::size_t start) {
    return std::vector<double>(ch.begin() + static_cast<std::ptrdiff_t>(start),
                               ch.begin() + static_cast<std::ptrdiff_t>(start + length));
  };
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t start = w * stride;
    Window win;
    win.subject_id = r.meta.subject.subject_id;
    win.trial_id = r.meta.trial_id();
    win.label = r.meta.breathing_type;
    win.fs = r.meta.nominal_fs;
    win.start_index = start;
    win.length = length;
    win.pressure = slice(r.pressure, start);
    win.flow = slice(r.flow, start);
    win.tidal_volume = slice(r.tidal_volume, start);
    win.chest_circ = slice(r.chest_circ, start);
    win.abdomen_circ = slice(r.abdomen_circ, start);
    out.push_back(std::move(win));
  }
  return out;
}

inline std::vector<Window> segment_windows(const TrialRecord& r, double window_s, double overlap_fraction) {
  return segment_windows(r, WindowParams{window_s, overlap_fraction});
}

}  // namespace respira
