#pragma once

// Trial and cohort data: metadata types, the canonical trial CSV, the JSON
// manifest, and the seeded synthetic trial generator.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "respira/error.hpp"
#include "respira/random.hpp"

namespace respira {

enum class BreathingType : int { Normal = 0, Panting = 1, Deep = 2 };

inline constexpr int kClassCount = 3;
inline constexpr std::array<BreathingType, kClassCount> kBreathingTypes = {
    BreathingType::Normal, BreathingType::Panting, BreathingType::Deep};

constexpr int to_code(BreathingType t) noexcept { return static_cast<int>(t); }

constexpr std::string_view to_string(BreathingType t) noexcept {
  switch (t) {
    case BreathingType::Normal: return "normal";
    case BreathingType::Panting: return "panting";
    case BreathingType::Deep: return "deep";
  }
  return "unknown";
}

inline std::optional<BreathingType> parse_breathing_type(std::string_view text) {
  for (auto t : kBreathingTypes) {
    if (text == to_string(t)) return t;
  }
  return std::nullopt;
}

inline BreathingType breathing_type_from_code(int code) {
  if (code < 0 || code >= kClassCount) {
    fail(ErrorKind::InvalidParams, "breathing type code " + std::to_string(code));
  }
  return static_cast<BreathingType>(code);
}

enum class Sex { M, F };

struct SubjectMeta {
  std::string subject_id;
  Sex sex = Sex::M;
  int age = 0;
  double height_cm = 0.0;
  double weight_kg = 0.0;
  bool smoker_or_vaper = false;
  bool asthmatic = false;

  friend bool operator==(const SubjectMeta&, const SubjectMeta&) = default;
};

struct TrialMeta {
  SubjectMeta subject;
  BreathingType breathing_type = BreathingType::Normal;
  double peep_cmh2o = 0.0;
  double nominal_fs = 100.0;
  /// Filled from the sample count when a trial is loaded or generated.
  double duration_s = 0.0;

  std::string trial_id() const {
    return subject.subject_id + "_" + std::string(to_string(breathing_type));
  }

  friend bool operator==(const TrialMeta&, const TrialMeta&) = default;
};

inline void validate(const SubjectMeta& s) {
  if (s.subject_id.empty()) fail(ErrorKind::SchemaViolation, "id");
  if (s.age <= 0) fail(ErrorKind::SchemaViolation, "age");
  if (!(s.height_cm > 0.0)) fail(ErrorKind::SchemaViolation, "height_cm");
  if (!(s.weight_kg > 0.0)) fail(ErrorKind::SchemaViolation, "weight_kg");
}

inline void validate(const TrialMeta& m, bool require_duration) {
  validate(m.subject);
  if (!(m.nominal_fs > 0.0) || !std::isfinite(m.nominal_fs)) fail(ErrorKind::SchemaViolation, "fs_hz");
  if (!(m.peep_cmh2o >= 0.0) || !std::isfinite(m.peep_cmh2o)) fail(ErrorKind::SchemaViolation, "peep_cmh2o");
  if (require_duration && !(m.duration_s > 0.0)) fail(ErrorKind::SchemaViolation, "duration_s");
}

/// One breathing trial. All channels share the time base.
struct TrialRecord {
  TrialMeta meta;
  std::vector<double> time;
  std::vector<double> pressure;
  std::vector<double> flow;
  std::vector<double> tidal_volume;
  std::vector<double> chest_circ;
  std::vector<double> abdomen_circ;
  std::vector<std::size_t> insp_starts;

  std::size_t size() const noexcept { return time.size(); }

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

/// Column names of the canonical trial CSV, in file order.
inline constexpr std::array<std::string_view, 7> kTrialColumns = {
    "time_s", "pressure_cmh2o", "flow_lps", "tidal_volume_l", "insp_start", "chest_mm", "abdomen_mm"};

inline std::string trial_header() {
  std::string h;
  for (std::size_t i = 0; i < kTrialColumns.size(); ++i) {
    if (i) h += ',';
    h += kTrialColumns[i];
  }
  return h;
}

/// Structural checks shared by the loader, the writer and the generator.
/// NaN channel values are allowed; the time base must be finite and strictly
/// increasing with a median step within 1% of 1/nominal_fs.
inline void validate(const TrialRecord& r) {
  const std::size_t n = r.time.size();
  if (n < 2) fail(ErrorKind::InvalidRecord, "fewer than 2 samples");
  for (const auto* ch : {&r.pressure, &r.flow, &r.tidal_volume, &r.chest_circ, &r.abdomen_circ}) {
    if (ch->size() != n) fail(ErrorKind::InvalidRecord, "channel length mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(r.time[i]) || (i > 0 && !(r.time[i] > r.time[i - 1]))) {
      fail(ErrorKind::NonMonotoneTime, "row " + std::to_string(i + 1));
    }
  }
  std::vector<double> steps(n - 1);
  for (std::size_t i = 1; i < n; ++i) steps[i - 1] = r.time[i] - r.time[i - 1];
  auto mid = steps.begin() + static_cast<std::ptrdiff_t>(steps.size() / 2);
  std::nth_element(steps.begin(), mid, steps.end());
  const double expected = 1.0 / r.meta.nominal_fs;
  if (std::abs(*mid - expected) > 0.01 * expected) {
    fail(ErrorKind::InvalidRecord, "median sample interval " + std::to_string(*mid) +
                                       " s does not match fs " + std::to_string(r.meta.nominal_fs));
  }
  for (std::size_t k = 0; k < r.insp_starts.size(); ++k) {
    if (r.insp_starts[k] >= n || (k > 0 && r.insp_starts[k] <= r.insp_starts[k - 1])) {
      fail(ErrorKind::InvalidRecord, "inspiratory start indices not strictly increasing within range");
    }
  }
}

// ---------------------------------------------------------------------------
// Trial CSV

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

/// Empty fields and any-case "NaN" parse as quiet NaN.
inline std::optional<double> parse_cell(std::string_view cell) {
  cell = trim(cell);
  if (cell.empty() || iequals(cell, "nan")) return std::numeric_limits<double>::quiet_NaN();
  const std::string buf(cell);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size()) return std::nullopt;
  return v;
}

inline std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Reads a trial CSV. `meta.duration_s` is overwritten with n / nominal_fs.
inline TrialRecord load_trial(const std::filesystem::path& path, TrialMeta meta) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, path.string());

  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::BadHeader, "expected '" + trial_header() + "', found empty file");
  std::string_view header = detail::trim(line);
  if (header.starts_with("\xEF\xBB\xBF")) header.remove_prefix(3);
  if (header != trial_header()) {
    fail(ErrorKind::BadHeader, "expected '" + trial_header() + "', found '" + std::string(header) + "'");
  }

  TrialRecord r;
  r.meta = std::move(meta);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != kTrialColumns.size()) fail(ErrorKind::RaggedRow, "row " + std::to_string(row));
    std::array<double, 7> v{};
    for (std::size_t c = 0; c < cells.size(); ++c) {
      auto parsed = detail::parse_cell(cells[c]);
      if (!parsed) fail(ErrorKind::RaggedRow, "row " + std::to_string(row) + ": unparseable cell");
      v[c] = *parsed;
    }
    if (!std::isfinite(v[0]) || (!r.time.empty() && !(v[0] > r.time.back()))) {
      fail(ErrorKind::NonMonotoneTime, "row " + std::to_string(row));
    }
    r.time.push_back(v[0]);
    r.pressure.push_back(v[1]);
    r.flow.push_back(v[2]);
    r.tidal_volume.push_back(v[3]);
    if (std::isfinite(v[4]) && v[4] != 0.0) r.insp_starts.push_back(r.time.size() - 1);
    r.chest_circ.push_back(v[5]);
    r.abdomen_circ.push_back(v[6]);
  }
  r.meta.duration_s = static_cast<double>(r.size()) / r.meta.nominal_fs;
  validate(r);
  return r;
}

inline void write_trial(const TrialRecord& r, const std::filesystem::path& path) {
  validate(r);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");
  out << trial_header() << '\n';
  std::size_t next_marker = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const bool marker = next_marker < r.insp_starts.size() && r.insp_starts[next_marker] == i;
    if (marker) ++next_marker;
    out << detail::format_double(r.time[i]) << ',' << detail::format_double(r.pressure[i]) << ','
        << detail::format_double(r.flow[i]) << ',' << detail::format_double(r.tidal_volume[i]) << ','
        << (marker ? '1' : '0') << ',' << detail::format_double(r.chest_circ[i]) << ','
        << detail::format_double(r.abdomen_circ[i]) << '\n';
  }
  out.flush();
  if (!out) fail(ErrorKind::IoFailure, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Manifest

struct ManifestEntry {
  std::filesystem::path path;  // resolved against the manifest directory
  TrialMeta meta;
};

struct DatasetManifest {
  std::string provenance;
  std::vector<ManifestEntry> trials;
};

namespace detail {

template <class T>
T require_field(const nlohmann::json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) fail(ErrorKind::SchemaViolation, key);
  const auto& v = obj.at(key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) fail(ErrorKind::SchemaViolation, key);
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) fail(ErrorKind::SchemaViolation, key);
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) fail(ErrorKind::SchemaViolation, key);
  } else {
    if (!v.is_number()) fail(ErrorKind::SchemaViolation, key);
  }
  return v.get<T>();
}

}  // namespace detail

inline nlohmann::json to_json(const SubjectMeta& s) {
  return {{"id", s.subject_id},
          {"sex", s.sex == Sex::M ? "M" : "F"},
          {"age", s.age},
          {"height_cm", s.height_cm},
          {"weight_kg", s.weight_kg},
          {"smoker_or_vaper", s.smoker_or_vaper},
          {"asthmatic", s.asthmatic}};
}

inline SubjectMeta subject_from_json(const nlohmann::json& j) {
  SubjectMeta s;
  s.subject_id = detail::require_field<std::string>(j, "id");
  const auto sex = detail::require_field<std::string>(j, "sex");
  if (sex == "M") {
    s.sex = Sex::M;
  } else if (sex == "F") {
    s.sex = Sex::F;
  } else {
    fail(ErrorKind::SchemaViolation, "sex");
  }
  s.age = detail::require_field<int>(j, "age");
  s.height_cm = detail::require_field<double>(j, "height_cm");
  s.weight_kg = detail::require_field<double>(j, "weight_kg");
  s.smoker_or_vaper = detail::require_field<bool>(j, "smoker_or_vaper");
  s.asthmatic = detail::require_field<bool>(j, "asthmatic");
  validate(s);
  return s;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::SchemaViolation, std::string("json: ") + e.what());
  }

  DatasetManifest m;
  m.provenance = detail::require_field<std::string>(doc, "provenance");
  if (!doc.contains("trials") || !doc["trials"].is_array()) fail(ErrorKind::SchemaViolation, "trials");

  const auto base = path.parent_path();
  std::set<std::pair<std::string, int>> seen;
  for (const auto& t : doc["trials"]) {
    ManifestEntry e;
    const auto rel = detail::require_field<std::string>(t, "path");
    if (!t.contains("subject")) fail(ErrorKind::SchemaViolation, "subject");
    e.meta.subject = subject_from_json(t["subject"]);
    const auto type = parse_breathing_type(detail::require_field<std::string>(t, "breathing_type"));
    if (!type) fail(ErrorKind::SchemaViolation, "breathing_type");
    e.meta.breathing_type = *type;
    e.meta.peep_cmh2o = detail::require_field<double>(t, "peep_cmh2o");
    e.meta.nominal_fs = detail::require_field<double>(t, "fs_hz");
    if (t.contains("duration_s")) e.meta.duration_s = detail::require_field<double>(t, "duration_s");
    validate(e.meta, t.contains("duration_s"));

    if (!seen.emplace(e.meta.subject.subject_id, to_code(*type)).second) {
      fail(ErrorKind::DuplicateTrial, e.meta.subject.subject_id + ", " + std::string(to_string(*type)));
    }
    const std::filesystem::path p(rel);
    e.path = p.is_absolute() ? p : base / p;
    if (!std::filesystem::exists(e.path)) fail(ErrorKind::MissingFile, e.path.string());
    m.trials.push_back(std::move(e));
  }
  return m;
}

/// Writes the manifest with trial paths relative to the manifest location
/// whenever they live below it.
inline void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  nlohmann::json trials = nlohmann::json::array();
  const auto base = path.parent_path();
  for (const auto& e : m.trials) {
    auto rel = e.path.lexically_relative(base.empty() ? std::filesystem::path(".") : base);
    const bool inside = !rel.empty() && *rel.begin() != "..";
    trials.push_back({{"path", (inside ? rel : e.path).generic_string()},
                      {"subject", to_json(e.meta.subject)},
                      {"breathing_type", std::string(to_string(e.meta.breathing_type))},
                      {"peep_cmh2o", e.meta.peep_cmh2o},
                      {"fs_hz", e.meta.nominal_fs},
                      {"duration_s", e.meta.duration_s}});
  }
  const nlohmann::json doc = {{"provenance", m.provenance}, {"trials", trials}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  if (!out) fail(ErrorKind::IoFailure, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Synthetic trials

struct SyntheticSpec {
  double breathing_frequency_hz = 0.25;
  double duration_s = 65.0;
  double fs_hz = 100.0;
  double tidal_amplitude_l = 0.5;
  double peep_cmh2o = 5.0;
  double noise_std_fraction = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr double kChestOffsetMm = 900.0;
inline constexpr double kAbdomenOffsetMm = 850.0;
inline constexpr double kChestGainMmPerL = 40.0;
inline constexpr double kAbdomenGainMmPerL = 30.0;

/// Generator defaults per class: 0.25 Hz / 0.5 L / 65 s, 1.5 Hz / 0.3 L / 35 s,
/// 0.15 Hz / 1.5 L / 65 s for normal, panting and deep breathing.
inline SyntheticSpec default_synthetic_spec(BreathingType type) {
  SyntheticSpec s;
  switch (type) {
    case BreathingType::Normal:
      s.breathing_frequency_hz = 0.25;
      s.tidal_amplitude_l = 0.5;
      s.duration_s = 65.0;
      break;
    case BreathingType::Panting:
      s.breathing_frequency_hz = 1.5;
      s.tidal_amplitude_l = 0.3;
      s.duration_s = 35.0;
      break;
    case BreathingType::Deep:
      s.breathing_frequency_hz = 0.15;
      s.tidal_amplitude_l = 1.5;
      s.duration_s = 65.0;
      break;
  }
  return s;
}

inline void validate(const SyntheticSpec& s) {
  if (!(s.fs_hz > 0.0)) fail(ErrorKind::InvalidSpec, "fs_hz must be positive");
  if (!(s.breathing_frequency_hz > 0.0 && s.breathing_frequency_hz < s.fs_hz / 2.0)) {
    fail(ErrorKind::InvalidSpec, "breathing frequency must lie in (0, fs/2)");
  }
  if (!(s.duration_s > 0.0)) fail(ErrorKind::InvalidSpec, "duration_s must be positive");
  if (!(s.tidal_amplitude_l > 0.0)) fail(ErrorKind::InvalidSpec, "tidal amplitude must be positive");
  if (!(s.noise_std_fraction >= 0.0 && s.noise_std_fraction < 1.0)) {
    fail(ErrorKind::InvalidSpec, "noise_std_fraction must lie in [0, 1)");
  }
  if (!(s.peep_cmh2o >= 0.0)) fail(ErrorKind::InvalidSpec, "peep must be non-negative");
  if (std::llround(s.duration_s * s.fs_hz) < 2) fail(ErrorKind::InvalidSpec, "fewer than 2 samples");
}

/// Raised-cosine tidal volume with analytically consistent flow, pressure
/// and circumference channels. Pure function of its arguments.
inline TrialRecord generate_synthetic_trial(const SyntheticSpec& spec, BreathingType type,
                                            const SubjectMeta& subject) {
  validate(spec);
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.fs_hz));
  const double f = spec.breathing_frequency_hz;
  const double amp = spec.tidal_amplitude_l;
  const double omega = 2.0 * std::numbers::pi * f;

  TrialRecord r;
  r.meta.subject = subject;
  r.meta.breathing_type = type;
  r.meta.peep_cmh2o = spec.peep_cmh2o;
  r.meta.nominal_fs = spec.fs_hz;
  r.meta.duration_s = static_cast<double>(n) / spec.fs_hz;
  r.time.resize(n);
  r.pressure.resize(n);
  r.flow.resize(n);
  r.tidal_volume.resize(n);
  r.chest_circ.resize(n);
  r.abdomen_circ.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.fs_hz;
    const double vt = 0.5 * amp * (1.0 - std::cos(omega * t));
    r.time[i] = t;
    r.tidal_volume[i] = vt;
    r.flow[i] = 0.5 * amp * omega * std::sin(omega * t);
    r.pressure[i] = spec.peep_cmh2o + 0.5 * amp * std::sin(omega * t);
    r.chest_circ[i] = kChestOffsetMm + kChestGainMmPerL * vt;
    r.abdomen_circ[i] = kAbdomenOffsetMm + kAbdomenGainMmPerL * vt;
  }

  if (spec.noise_std_fraction > 0.0) {
    std::uint64_t seed = derive_seed(spec.seed, fnv1a(subject.subject_id));
    seed = derive_seed(seed, static_cast<std::uint64_t>(to_code(type)));
    std::mt19937_64 rng(seed);
    for (auto* ch : {&r.tidal_volume, &r.flow, &r.pressure, &r.chest_circ, &r.abdomen_circ}) {
      const auto [lo, hi] = std::minmax_element(ch->begin(), ch->end());
      const double sd = spec.noise_std_fraction * (*hi - *lo);
      if (!(sd > 0.0)) continue;
      std::normal_distribution<double> noise(0.0, sd);
      for (double& v : *ch) v += noise(rng);
    }
  }

  for (std::size_t k = 0;; ++k) {
    const auto idx = std::llround(static_cast<double>(k) * spec.fs_hz / f);
    if (idx < 0 || static_cast<std::size_t>(idx) >= n) break;
    r.insp_starts.push_back(static_cast<std::size_t>(idx));
  }
  return r;
}

}  // namespace respira
