#pragma once

// End-to-end orchestration behind the command-line tool: synthetic cohort
// generation, the ingest -> clean -> window -> features -> CV experiment grid,
// the per-trial breathing-rate table, and report/plot emission.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "respira/dataset.hpp"
#include "respira/error.hpp"
#include "respira/eval/cross_validate.hpp"
#include "respira/eval/roc.hpp"
#include "respira/eval/splits.hpp"
#include "respira/features.hpp"
#include "respira/models/model.hpp"
#include "respira/preprocess.hpp"
#include "respira/random.hpp"
#include "respira/report/svg.hpp"
#include "respira/spectral.hpp"

namespace respira {

inline constexpr std::string_view kToolName = "respira";
inline constexpr int kReportFormatVersion = 1;

// ---------------------------------------------------------------------------
// Synthetic cohort

struct ClassWaveform {
  double frequency_hz = 0.25;
  double amplitude_l = 0.5;
  double duration_s = 65.0;
};

struct CohortSpec {
  std::size_t subjects = 30;
  std::uint64_t seed = 1;
  double fs_hz = 100.0;
  double noise_std_fraction = 0.05;
  /// Per-subject, per-class multiplicative jitter: factor drawn from U(1-j, 1+j).
  double frequency_jitter = 0.1;
  double amplitude_jitter = 0.1;
  double peep_cmh2o = 5.0;
  std::array<ClassWaveform, kClassCount> classes = {
      ClassWaveform{0.25, 0.5, 65.0}, ClassWaveform{1.5, 0.3, 35.0}, ClassWaveform{0.15, 1.5, 65.0}};
  std::string provenance = "synthetic cohort";
};

inline nlohmann::json to_json(const CohortSpec& s) {
  nlohmann::json classes = nlohmann::json::object();
  for (auto t : kBreathingTypes) {
    const auto& c = s.classes[static_cast<std::size_t>(to_code(t))];
    classes[std::string(to_string(t))] = {
        {"frequency_hz", c.frequency_hz}, {"amplitude_l", c.amplitude_l}, {"duration_s", c.duration_s}};
  }
  return {{"subjects", s.subjects},
          {"seed", s.seed},
          {"fs_hz", s.fs_hz},
          {"noise_std_fraction", s.noise_std_fraction},
          {"frequency_jitter", s.frequency_jitter},
          {"amplitude_jitter", s.amplitude_jitter},
          {"peep_cmh2o", s.peep_cmh2o},
          {"classes", classes},
          {"provenance", s.provenance}};
}

/// Every field is optional; missing ones keep their defaults.
inline CohortSpec cohort_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::InvalidSpec, "cohort spec must be a JSON object");
  CohortSpec s;
  auto number = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) fail(ErrorKind::InvalidSpec, key);
    out = j[key].get<double>();
  };
  static const std::set<std::string> known = {"subjects", "seed", "fs_hz", "noise_std_fraction", "frequency_jitter",
                                              "amplitude_jitter", "peep_cmh2o", "classes", "provenance"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) fail(ErrorKind::InvalidSpec, "unknown field '" + key + "'");
  }
  if (j.contains("subjects")) {
    if (!j["subjects"].is_number_integer() || j["subjects"].get<std::int64_t>() < 1) {
      fail(ErrorKind::InvalidSpec, "subjects");
    }
    s.subjects = j["subjects"].get<std::size_t>();
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() || j["seed"].get<std::int64_t>() < 0) fail(ErrorKind::InvalidSpec, "seed");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  number("fs_hz", s.fs_hz);
  number("noise_std_fraction", s.noise_std_fraction);
  number("frequency_jitter", s.frequency_jitter);
  number("amplitude_jitter", s.amplitude_jitter);
  number("peep_cmh2o", s.peep_cmh2o);
  if (j.contains("provenance")) {
    if (!j["provenance"].is_string()) fail(ErrorKind::InvalidSpec, "provenance");
    s.provenance = j["provenance"].get<std::string>();
  }
  if (j.contains("classes")) {
    const auto& cj = j["classes"];
    if (!cj.is_object()) fail(ErrorKind::InvalidSpec, "classes");
    for (const auto& [name, value] : cj.items()) {
      const auto type = parse_breathing_type(name);
      if (!type) fail(ErrorKind::InvalidSpec, "unknown class '" + name + "'");
      auto& c = s.classes[static_cast<std::size_t>(to_code(*type))];
      for (const auto& [key, v] : value.items()) {
        if (!v.is_number()) fail(ErrorKind::InvalidSpec, name + "." + key);
        if (key == "frequency_hz") {
          c.frequency_hz = v.get<double>();
        } else if (key == "amplitude_l") {
          c.amplitude_l = v.get<double>();
        } else if (key == "duration_s") {
          c.duration_s = v.get<double>();
        } else {
          fail(ErrorKind::InvalidSpec, "unknown field '" + name + "." + key + "'");
        }
      }
    }
  }
  if (!(s.frequency_jitter >= 0.0 && s.frequency_jitter < 1.0)) fail(ErrorKind::InvalidSpec, "frequency_jitter");
  if (!(s.amplitude_jitter >= 0.0 && s.amplitude_jitter < 1.0)) fail(ErrorKind::InvalidSpec, "amplitude_jitter");
  return s;
}

inline CohortSpec load_cohort_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::MissingFile, path.string());
  try {
    return cohort_spec_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::InvalidSpec, std::string("json: ") + e.what());
  }
}

struct Cohort {
  std::string provenance;
  std::vector<TrialRecord> trials;
};

inline std::string subject_label(std::size_t index, std::size_t total) {
  const std::size_t width = std::max<std::size_t>(2, std::to_string(total).size());
  std::string digits = std::to_string(index + 1);
  return "S" + std::string(width - digits.size(), '0') + digits;
}

/// Subjects alternate M/F; each draws demographics and per-class waveform
/// jitter from its own seeded stream.
inline Cohort generate_cohort(const CohortSpec& spec) {
  Cohort cohort;
  cohort.provenance = spec.provenance + " (seed " + std::to_string(spec.seed) + ")";
  for (std::size_t s = 0; s < spec.subjects; ++s) {
    std::mt19937_64 rng(derive_seed(spec.seed, s));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_int_distribution<int> age(19, 37);
    std::uniform_real_distribution<double> height(150.0, 195.0);
    std::uniform_real_distribution<double> weight(50.0, 100.0);
    std::bernoulli_distribution smoker(8.0 / 30.0);
    std::bernoulli_distribution asthma(2.0 / 30.0);

    SubjectMeta subject;
    subject.subject_id = subject_label(s, spec.subjects);
    subject.sex = s % 2 == 0 ? Sex::M : Sex::F;
    subject.age = age(rng);
    subject.height_cm = std::round(height(rng) * 10.0) / 10.0;
    subject.weight_kg = std::round(weight(rng) * 10.0) / 10.0;
    subject.smoker_or_vaper = smoker(rng);
    subject.asthmatic = asthma(rng);

    for (auto type : kBreathingTypes) {
      const auto& c = spec.classes[static_cast<std::size_t>(to_code(type))];
      SyntheticSpec ss;
      ss.breathing_frequency_hz = c.frequency_hz * (1.0 + spec.frequency_jitter * unit(rng));
      ss.tidal_amplitude_l = c.amplitude_l * (1.0 + spec.amplitude_jitter * unit(rng));
      ss.duration_s = c.duration_s;
      ss.fs_hz = spec.fs_hz;
      ss.peep_cmh2o = spec.peep_cmh2o;
      ss.noise_std_fraction = spec.noise_std_fraction;
      ss.seed = derive_seed(spec.seed, s);
      cohort.trials.push_back(generate_synthetic_trial(ss, type, subject));
    }
  }
  return cohort;
}

/// Writes trials/<trial_id>.csv and manifest.json under out_dir.
inline DatasetManifest write_cohort(const Cohort& cohort, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "trials", ec);
  if (ec) fail(ErrorKind::IoFailure, "cannot create " + (out_dir / "trials").string() + ": " + ec.message());
  DatasetManifest m;
  m.provenance = cohort.provenance;
  for (const auto& t : cohort.trials) {
    const auto path = out_dir / "trials" / (t.meta.trial_id() + ".csv");
    write_trial(t, path);
    m.trials.push_back({path, t.meta});
  }
  write_manifest(m, out_dir / "manifest.json");
  return m;
}

// ---------------------------------------------------------------------------
// Run configuration

enum class IncludeBr { No, Yes, Both };
enum class SplitterKind { Loocv, Kfold };

struct RunConfig {
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> synthetic_spec;
  /// Used when neither input path is given and `synthetic_default` is set.
  bool synthetic_default = false;
  WindowParams window;
  FrequencyBand br_band;
  BrChannel br_channel = BrChannel::TidalVolume;
  IncludeBr include_br = IncludeBr::Both;
  std::vector<ModelKind> models = {ModelKind::Forest, ModelKind::Logreg, ModelKind::Svm};
  SplitterKind splitter = SplitterKind::Kfold;
  std::size_t k = 5;
  bool stratified = true;
  bool group_by_subject = false;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir = "out";
  bool strict = false;
  bool tune_forest = false;
  bool plots = true;
  unsigned threads = 0;
  Hyperparams hyperparams;
};

inline void validate(const RunConfig& c) {
  const int inputs = (c.manifest ? 1 : 0) + (c.synthetic_spec ? 1 : 0) + (c.synthetic_default ? 1 : 0);
  if (inputs != 1) fail(ErrorKind::InvalidConfig, "exactly one input (manifest or synthetic spec) is required");
  if (!c.seed) fail(ErrorKind::InvalidConfig, "a seed is required");
  if (c.models.empty()) fail(ErrorKind::InvalidConfig, "at least one model is required");
  if (c.splitter == SplitterKind::Kfold && c.k < 2) fail(ErrorKind::BadK, "k must be >= 2");
  if (!(c.window.overlap_fraction >= 0.0 && c.window.overlap_fraction < 1.0)) {
    fail(ErrorKind::InvalidOverlap, "overlap must lie in [0, 1)");
  }
  if (!(c.window.window_s > 0.0)) fail(ErrorKind::InvalidConfig, "window length must be positive");
  if (!(c.br_band.lo_hz > 0.0 && c.br_band.lo_hz < c.br_band.hi_hz)) {
    fail(ErrorKind::InvalidConfig, "BR band must satisfy 0 < lo < hi");
  }
  const auto& f = c.hyperparams.forest;
  if (f.n_trees < 1 || f.tree.min_samples_split < 2 || (f.tree.max_depth != kUnlimitedDepth && f.tree.max_depth < 1)) {
    fail(ErrorKind::InvalidConfig, "forest hyperparameters out of range");
  }
  const auto& l = c.hyperparams.logreg;
  if (!(l.learning_rate > 0.0) || !(l.loss_tol > 0.0) || l.max_iters < 1 || !(l.l2_lambda >= 0.0)) {
    fail(ErrorKind::InvalidConfig, "logistic regression hyperparameters out of range");
  }
  const auto& s = c.hyperparams.svm;
  if (!(s.c > 0.0) || (s.gamma && !(*s.gamma > 0.0)) || !(s.smo_tol > 0.0) || s.max_passes < 1) {
    fail(ErrorKind::InvalidConfig, "svm hyperparameters out of range");
  }
}

inline std::string_view to_string(IncludeBr b) noexcept {
  switch (b) {
    case IncludeBr::No: return "false";
    case IncludeBr::Yes: return "true";
    case IncludeBr::Both: return "both";
  }
  return "unknown";
}

inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  json models = json::array();
  json hyper = json::object();
  for (auto m : c.models) {
    models.push_back(std::string(to_string(m)));
    hyper[std::string(to_string(m))] = to_json(c.hyperparams, m);
  }
  json input;
  if (c.manifest) {
    input = {{"kind", "manifest"}, {"path", c.manifest->generic_string()}};
  } else if (c.synthetic_spec) {
    input = {{"kind", "synthetic"}, {"spec", c.synthetic_spec->generic_string()}};
  } else {
    input = {{"kind", "synthetic"}, {"spec", "default"}};
  }
  return {{"input", input},
          {"window_s", c.window.window_s},
          {"overlap", c.window.overlap_fraction},
          {"br_band_hz", {c.br_band.lo_hz, c.br_band.hi_hz}},
          {"br_channel", std::string(to_string(c.br_channel))},
          {"include_br", std::string(to_string(c.include_br))},
          {"models", models},
          {"hyperparams", hyper},
          {"splitter", c.splitter == SplitterKind::Loocv ? "loocv" : "kfold"},
          {"k", c.splitter == SplitterKind::Kfold ? json(c.k) : json(nullptr)},
          {"stratified", c.stratified},
          {"group_by_subject", c.group_by_subject},
          {"tune_forest", c.tune_forest},
          {"seed", c.seed.value_or(0)},
          {"scaling", "zscore fitted per training fold"}};
}

// ---------------------------------------------------------------------------
// Run

/// Report plus every artifact, rendered in memory; nothing touches disk
/// until write_run_outputs().
struct RunOutcome {
  nlohmann::json report;
  std::map<std::string, std::string> files;  // file name -> content
  bool skipped_folds = false;
};

inline std::string report_text(const nlohmann::json& report) { return report.dump(2) + "\n"; }

namespace detail {

struct PreparedData {
  std::string provenance;
  std::vector<TrialRecord> trials;  // cleaned
  nlohmann::json trial_notes = nlohmann::json::array();
  std::vector<std::string> warnings;
};

inline PreparedData prepare_trials(const RunConfig& c) {
  PreparedData out;
  std::vector<TrialRecord> raw;
  if (c.manifest) {
    const auto m = load_manifest(*c.manifest);
    out.provenance = m.provenance;
    for (const auto& e : m.trials) raw.push_back(load_trial(e.path, e.meta));
  } else {
    const CohortSpec spec = c.synthetic_spec ? load_cohort_spec(*c.synthetic_spec) : CohortSpec{};
    auto cohort = generate_cohort(spec);
    out.provenance = cohort.provenance;
    raw = std::move(cohort.trials);
  }
  for (auto& r : raw) {
    try {
      auto cleaned = drop_nan_rows(r);
      out.trial_notes.push_back({{"trial_id", r.meta.trial_id()},
                                 {"rows", r.size()},
                                 {"rows_dropped", r.size() - cleaned.size()}});
      out.trials.push_back(std::move(cleaned));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::AllRowsDropped) throw;
      out.warnings.push_back(std::string(e.what()) + "; trial excluded");
    }
  }
  if (out.trials.empty()) fail(ErrorKind::EmptyInput, "no usable trials");
  return out;
}

inline std::string csv_line(std::initializer_list<std::string> cells) {
  std::string line;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) line += ',';
    line += c;
    first = false;
  }
  return line + "\n";
}

inline std::string roc_csv(const RocCurve& curve) {
  std::string out = "threshold,fpr,tpr\n";
  for (const auto& p : curve.points) {
    const std::string t = std::isinf(p.threshold) ? (p.threshold > 0 ? "inf" : "-inf") : format_double(p.threshold);
    out += csv_line({t, format_double(p.fpr), format_double(p.tpr)});
  }
  return out;
}

inline std::string feature_csv(const FeatureMatrix& m) {
  std::string out;
  for (const auto& name : m.feature_names) out += name + ",";
  out += "label,group_id,trial_id\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (double v : m.values.row(i)) out += format_double(v) + ",";
    out += std::to_string(m.labels[i]) + "," + m.group_ids[i] + "," + m.trial_ids[i] + "\n";
  }
  return out;
}

inline std::string safe_name(std::string s) {
  for (auto& ch : s) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
  }
  return s;
}

inline std::string signals_svg(const TrialRecord& r) {
  auto series = [&](const char* name, const std::vector<double>& y) { return svg::Series{name, r.time, y}; };
  std::vector<svg::Panel> panels = {
      {"Pressure", "time [s]", "cmH2O", {series("pressure", r.pressure)}},
      {"Flow", "time [s]", "L/s", {series("flow", r.flow)}},
      {"Tidal volume", "time [s]", "L", {series("tidal volume", r.tidal_volume)}},
      {"Circumference", "time [s]", "mm", {series("chest", r.chest_circ), series("abdomen", r.abdomen_circ)}},
  };
  panels.front().title = r.meta.trial_id() + ": pressure";
  return svg::render(panels);
}

inline std::string vtidal_svg(const std::vector<const TrialRecord*>& examples) {
  svg::Panel p{"Tidal volume by breathing type", "time [s]", "L", {}};
  for (const auto* r : examples) {
    // First 30 s keeps panting cycles distinguishable next to deep breaths.
    std::vector<double> t, v;
    for (std::size_t i = 0; i < r->size() && r->time[i] - r->time.front() <= 30.0; ++i) {
      t.push_back(r->time[i] - r->time.front());
      v.push_back(r->tidal_volume[i]);
    }
    p.series.push_back({std::string(to_string(r->meta.breathing_type)) + " (" + r->meta.subject.subject_id + ")", t, v});
  }
  return svg::render(std::vector<svg::Panel>{p}, 820, 360);
}

}  // namespace detail

struct SplitPlan {
  std::string name;
  std::vector<Split> splits;
  bool stratification_degraded = false;
};

inline std::vector<SplitPlan> plan_splits(const RunConfig& c, const FeatureMatrix& m) {
  std::vector<SplitPlan> plans;
  const std::uint64_t seed = *c.seed;
  if (c.splitter == SplitterKind::Loocv) {
    plans.push_back({"loocv", loocv_splits(m.rows()), false});
    if (c.group_by_subject) plans.push_back({"loso", leave_one_group_out_splits(m.group_ids), false});
  } else {
    if (c.k > m.rows()) fail(ErrorKind::BadK, "k=" + std::to_string(c.k) + " exceeds " + std::to_string(m.rows()) + " instances");
    const bool degraded = c.stratified && !stratification_feasible(m.labels, c.k);
    plans.push_back({(c.stratified && !degraded ? "stratified_kfold" : "kfold") + std::string("_k") + std::to_string(c.k),
                     kfold_splits(m.labels, c.k, seed, c.stratified), degraded});
    if (c.group_by_subject) {
      plans.push_back({"group_kfold_k" + std::to_string(c.k), group_kfold_splits(m.group_ids, c.k, seed), false});
    }
  }
  return plans;
}

inline RunOutcome run_pipeline(const RunConfig& c) {
  validate(c);
  const unsigned threads = c.threads == 0 ? default_thread_count() : c.threads;
  auto data = detail::prepare_trials(c);

  std::vector<Window> windows;
  nlohmann::json windowless = nlohmann::json::array();
  for (const auto& t : data.trials) {
    auto w = segment_windows(t, c.window);
    if (w.empty()) windowless.push_back(t.meta.trial_id());
    for (auto& x : w) windows.push_back(std::move(x));
  }
  if (windows.empty()) fail(ErrorKind::EmptyInput, "no trial is long enough for one window");

  const bool need_br = c.include_br != IncludeBr::No;
  const FeatureMatrix full = assemble_matrix(windows, need_br, c.br_band, c.br_channel, threads);
  std::vector<FeatureMatrix> variants;
  if (c.include_br != IncludeBr::Yes) variants.push_back(without_br(full));
  if (need_br) variants.push_back(full);

  const auto plans = plan_splits(c, full);

  RunOutcome outcome;
  nlohmann::json results = nlohmann::json::array();
  std::vector<std::string> warnings = data.warnings;
  for (const auto& t : windowless) warnings.push_back("trial " + t.get<std::string>() + " shorter than one window");
  for (const auto& plan : plans) {
    if (plan.stratification_degraded) {
      warnings.push_back(plan.name + ": a class has fewer than k members; folds are not stratified");
    }
  }

  std::map<std::string, std::vector<svg::Series>> roc_series;  // "<model>_<class>" -> curves
  for (const auto& variant : variants) {
    for (auto kind : c.models) {
      for (const auto& plan : plans) {
        ModelSpec spec{kind, c.hyperparams, *c.seed};
        spec.reseed(*c.seed);
        CvReport rep = (kind == ModelKind::Forest && c.tune_forest)
                           ? cross_validate(tuned_forest_factory(spec, ForestGrid{}), variant, plan.splits,
                                            CvOptions{true, kClassCount, threads})
                           : cross_validate(model_factory(spec), variant, plan.splits,
                                            CvOptions{true, kClassCount, threads});
        rep.config = {{"model", std::string(to_string(kind))},
                      {"hyperparams", to_json(c.hyperparams, kind)},
                      {"includes_br", variant.includes_br},
                      {"splitter", plan.name},
                      {"seed", *c.seed}};
        auto entry = to_json(rep);
        entry["model"] = std::string(to_string(kind));
        entry["includes_br"] = variant.includes_br;
        entry["splitter"] = plan.name;
        results.push_back(entry);
        if (rep.skipped_folds() > 0) {
          outcome.skipped_folds = true;
          warnings.push_back(std::string(to_string(kind)) + (variant.includes_br ? " with BR" : " without BR") + " " +
                             plan.name + ": " + std::to_string(rep.skipped_folds()) + " of " +
                             std::to_string(rep.folds.size()) + " folds skipped (training rows miss a class)");
        }

        const std::string tag = std::string(to_string(kind)) + (variant.includes_br ? "_br" : "_nobr") +
                                (plans.size() > 1 ? "_" + plan.name : "");
        for (std::size_t cls = 0; cls < rep.roc.size(); ++cls) {
          if (!rep.roc[cls]) continue;
          const std::string cname(to_string(static_cast<BreathingType>(cls)));
          outcome.files["roc_" + tag + "_" + cname + ".csv"] = detail::roc_csv(*rep.roc[cls]);
          svg::Series s;
          s.label = std::string(variant.includes_br ? "with BR" : "without BR") + (plans.size() > 1 ? " " + plan.name : "") +
                    " (AUC " + svg::tick_label(rep.auc[cls]) + ")";
          for (const auto& p : rep.roc[cls]->points) {
            s.x.push_back(p.fpr);
            s.y.push_back(p.tpr);
          }
          roc_series[std::string(to_string(kind)) + "_" + cname].push_back(std::move(s));
        }
      }
    }
  }

  // BR audit at trial level across pressure, flow and tidal volume.
  nlohmann::json br_audit = nlohmann::json::array();
  for (const auto& t : data.trials) {
    try {
      const auto bc = br_consensus(t, c.br_band);
      br_audit.push_back({{"trial_id", t.meta.trial_id()},
                          {"pressure_bpm", bc.pressure.bpm},
                          {"flow_bpm", bc.flow.bpm},
                          {"tidal_volume_bpm", bc.tidal_volume.bpm},
                          {"consensus_bpm", bc.consensus_bpm},
                          {"max_pairwise_diff_bpm", bc.max_pairwise_diff_bpm}});
    } catch (const Error& e) {
      warnings.push_back("BR audit failed for " + t.meta.trial_id() + ": " + e.what());
    }
  }

  std::array<std::size_t, kClassCount> per_class{};
  for (int l : full.labels) ++per_class[static_cast<std::size_t>(l)];
  nlohmann::json class_counts = nlohmann::json::object();
  for (auto t : kBreathingTypes) class_counts[std::string(to_string(t))] = per_class[static_cast<std::size_t>(to_code(t))];

  outcome.report = {
      {"tool", kToolName},
      {"format_version", kReportFormatVersion},
      {"config", to_json(c)},
      {"dataset",
       {{"provenance", data.provenance},
        {"n_trials", data.trials.size()},
        {"n_windows", full.rows()},
        {"windows_per_class", class_counts},
        {"feature_names", full.feature_names},
        {"trials_without_windows", windowless},
        {"short_cycle_windows", full.short_cycle_rows.size()},
        {"trials", data.trial_notes},
        {"br_audit", br_audit}}},
      {"results", results},
      {"warnings", warnings}};
  if (c.splitter == SplitterKind::Loocv && c.group_by_subject) {
    outcome.report["notes"] = {
        "instance-level LOOCV keeps windows of the test subject in training; compare with the loso entries"};
  }

  outcome.files["features.csv"] = detail::feature_csv(full);
  if (c.plots) {
    for (const auto& [key, series] : roc_series) {
      svg::Panel p{"ROC " + key, "false positive rate", "true positive rate", series, true};
      outcome.files["roc_" + key + ".svg"] = svg::render(p);
    }
    const std::string first_subject = data.trials.front().meta.subject.subject_id;
    std::vector<const TrialRecord*> examples;
    for (const auto& t : data.trials) {
      if (t.meta.subject.subject_id != first_subject) continue;
      outcome.files["signals_" + detail::safe_name(t.meta.trial_id()) + ".svg"] = detail::signals_svg(t);
      examples.push_back(&t);
    }
    outcome.files["vtidal_compare.svg"] = detail::vtidal_svg(examples);
  }
  return outcome;
}

inline void write_run_outputs(const RunOutcome& outcome, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorKind::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream out(out_dir / name, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoFailure, "cannot open " + (out_dir / name).string());
    out << content;
    if (!out) fail(ErrorKind::IoFailure, "write failed for " + (out_dir / name).string());
  };
  write("report.json", report_text(outcome.report));
  for (const auto& [name, content] : outcome.files) write(name, content);
}

// ---------------------------------------------------------------------------
// Breathing-rate table

struct BrRow {
  std::string trial_id;
  BreathingType breathing_type;
  BrConsensus estimate;
};

/// Trials whose id contains `selector` (all when empty), cleaned first.
inline std::vector<BrRow> br_table(const DatasetManifest& manifest, std::string_view selector, FrequencyBand band) {
  std::vector<BrRow> rows;
  for (const auto& e : manifest.trials) {
    const auto id = e.meta.trial_id();
    if (!selector.empty() && id.find(selector) == std::string::npos) continue;
    const auto record = drop_nan_rows(load_trial(e.path, e.meta));
    rows.push_back({id, e.meta.breathing_type, br_consensus(record, band)});
  }
  return rows;
}

inline std::string br_table_csv(const std::vector<BrRow>& rows) {
  std::string out =
      "trial_id,breathing_type,pressure_bpm,flow_bpm,tidal_volume_bpm,consensus_bpm,max_pairwise_diff_bpm\n";
  for (const auto& r : rows) {
    out += detail::csv_line({r.trial_id, std::string(to_string(r.breathing_type)),
                             detail::format_double(r.estimate.pressure.bpm), detail::format_double(r.estimate.flow.bpm),
                             detail::format_double(r.estimate.tidal_volume.bpm),
                             detail::format_double(r.estimate.consensus_bpm),
                             detail::format_double(r.estimate.max_pairwise_diff_bpm)});
  }
  return out;
}

}  // namespace respira
