#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "respira/dataset.hpp"
#include "respira/error.hpp"
#include "respira/matrix.hpp"
#include "respira/parallel.hpp"
#include "respira/preprocess.hpp"
#include "respira/spectral.hpp"

namespace respira {

inline constexpr std::array<std::string_view, 5> kChannelNames = {
    "pressure", "flow", "tidal_volume", "chest_circ", "abdomen_circ"};
inline constexpr std::array<std::string_view, 5> kStatisticNames = {"mean", "std", "min", "max", "rms"};
inline constexpr std::size_t kBaseFeatureCount = kChannelNames.size() * kStatisticNames.size();
inline constexpr std::string_view kBrFeatureName = "br_bpm";

inline std::vector<std::string> feature_names(bool include_br) {
  std::vector<std::string> names;
  for (auto ch : kChannelNames) {
    for (auto st : kStatisticNames) names.push_back(std::string(ch) + "_" + std::string(st));
  }
  if (include_br) names.emplace_back(kBrFeatureName);
  return names;
}

/// mean, population std, min, max, RMS of one channel slice.
inline std::array<double, 5> channel_statistics(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  double sum = 0.0, sq = 0.0;
  double lo = x.front(), hi = x.front();
  for (double v : x) {
    sum += v;
    sq += v * v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double mean = sum / n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / n), lo, hi, std::sqrt(sq / n)};
}

inline std::vector<double> window_features(const Window& w) {
  std::vector<double> out;
  out.reserve(kBaseFeatureCount);
  for (const auto* ch : {&w.pressure, &w.flow, &w.tidal_volume, &w.chest_circ, &w.abdomen_circ}) {
    if (ch->empty()) fail(ErrorKind::EmptyInput, "window channel is empty");
    for (double s : channel_statistics(*ch)) out.push_back(s);
  }
  return out;
}

/// Channel the BR feature is estimated from.
enum class BrChannel { Pressure, Flow, TidalVolume };

constexpr std::string_view to_string(BrChannel c) noexcept {
  switch (c) {
    case BrChannel::Pressure: return "pressure";
    case BrChannel::Flow: return "flow";
    case BrChannel::TidalVolume: return "tidal_volume";
  }
  return "unknown";
}

inline std::optional<BrChannel> parse_br_channel(std::string_view s) {
  for (auto c : {BrChannel::Pressure, BrChannel::Flow, BrChannel::TidalVolume}) {
    if (s == to_string(c)) return c;
  }
  return std::nullopt;
}

struct FeatureMatrix {
  Matrix values;
  std::vector<int> labels;
  std::vector<std::string> group_ids;
  std::vector<std::string> trial_ids;
  std::vector<std::string> feature_names;
  bool includes_br = false;
  /// Rows whose window holds fewer than two cycles at the estimated rate.
  std::vector<std::size_t> short_cycle_rows;

  std::size_t rows() const noexcept { return values.rows(); }
  std::size_t cols() const noexcept { return values.cols(); }
};

/// Same rows with the trailing BR column removed.
inline FeatureMatrix without_br(const FeatureMatrix& m) {
  if (!m.includes_br) return m;
  FeatureMatrix out = m;
  out.values = m.values.first_cols(m.cols() - 1);
  out.feature_names.pop_back();
  out.includes_br = false;
  out.short_cycle_rows.clear();
  return out;
}

inline FeatureMatrix assemble_matrix(std::span<const Window> windows, bool include_br,
                                     FrequencyBand br_band = {}, BrChannel br_channel = BrChannel::TidalVolume,
                                     unsigned threads = 1) {
  if (windows.empty()) fail(ErrorKind::EmptyInput, "no windows to featurize");
  FeatureMatrix m;
  m.feature_names = feature_names(include_br);
  m.includes_br = include_br;
  const std::size_t d = m.feature_names.size();
  m.values = Matrix(windows.size(), d);
  std::vector<char> short_cycle(windows.size(), 0);

  parallel_for(
      windows.size(),
      [&](std::size_t i) {
        const auto& w = windows[i];
        auto row = m.values.row(i);
        const auto base = window_features(w);
        std::copy(base.begin(), base.end(), row.begin());
        if (include_br) {
          const auto& source = br_channel == BrChannel::Pressure ? w.pressure
                               : br_channel == BrChannel::Flow   ? w.flow
                                                                 : w.tidal_volume;
          const auto br = estimate_breathing_rate(source, w.fs, br_band);
          row[d - 1] = br.bpm;
          const double cycles = static_cast<double>(w.length) / w.fs * br.peak_freq_hz;
          short_cycle[i] = cycles < 2.0;
        }
      },
      threads);

  for (std::size_t i = 0; i < windows.size(); ++i) {
    m.labels.push_back(to_code(windows[i].label));
    m.group_ids.push_back(windows[i].subject_id);
    m.trial_ids.push_back(windows[i].trial_id);
    if (short_cycle[i]) m.short_cycle_rows.push_back(i);
  }
  return m;
}

inline void write_feature_csv(const FeatureMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot open " + path.string());
  for (const auto& name : m.feature_names) out << name << ',';
  out << "label,group_id,trial_id\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (double v : m.values.row(i)) out << detail::format_double(v) << ',';
    out << m.labels[i] << ',' << m.group_ids[i] << ',' << m.trial_ids[i] << '\n';
  }
  if (!out) fail(ErrorKind::IoFailure, "write failed for " + path.string());
}

}  // namespace respira
