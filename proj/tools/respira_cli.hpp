#pragma once

// Command-line front end: generate, ingest, br, run. The entry point takes
// its arguments and streams explicitly so tests can drive it in-process.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "respira/respira.hpp"

namespace respira::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitSkippedFolds = 1;
inline constexpr int kExitError = 2;

struct GenerateArgs {
  std::string spec_file;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> subjects;
};

inline int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  CohortSpec spec = a.spec_file.empty() ? CohortSpec{} : load_cohort_spec(a.spec_file);
  if (a.seed) spec.seed = *a.seed;
  if (a.subjects) {
    if (*a.subjects < 1) fail(ErrorKind::InvalidSpec, "subjects must be >= 1");
    spec.subjects = *a.subjects;
  }
  const auto manifest = write_cohort(generate_cohort(spec), a.out_dir);
  out << "wrote " << manifest.trials.size() << " trials and "
      << (std::filesystem::path(a.out_dir) / "manifest.json").generic_string() << "\n";
  return kExitOk;
}

struct IngestArgs {
  std::string source;
  std::vector<std::string> column_map;  // canonical=source
  double time_scale = 1.0;
  std::string subject_json;
  std::string breathing_type;
  double peep = 0.0;
  double fs = 100.0;
  std::string out_dir;
  std::string provenance = "ingested";
};

/// Converts an arbitrary CSV with a header row into the canonical trial
/// layout and appends it to <out_dir>/manifest.json (created if absent).
inline int cmd_ingest(const IngestArgs& a, std::ostream& out) {
  std::map<std::string, std::string> mapping;
  for (const auto& m : a.column_map) {
    const auto eq = m.find('=');
    if (eq == std::string::npos) fail(ErrorKind::InvalidConfig, "column mapping '" + m + "' is not canonical=source");
    mapping[m.substr(0, eq)] = m.substr(eq + 1);
  }
  for (const auto& [canonical, _] : mapping) {
    if (std::find(kTrialColumns.begin(), kTrialColumns.end(), canonical) == kTrialColumns.end()) {
      fail(ErrorKind::InvalidConfig, "unknown canonical column '" + canonical + "'");
    }
  }
  const auto type = parse_breathing_type(a.breathing_type);
  if (!type) fail(ErrorKind::InvalidConfig, "unknown breathing type '" + a.breathing_type + "'");

  std::ifstream sj(a.subject_json);
  if (!sj) fail(ErrorKind::MissingFile, a.subject_json);
  SubjectMeta subject;
  try {
    subject = subject_from_json(nlohmann::json::parse(sj));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::SchemaViolation, std::string("subject json: ") + e.what());
  }

  std::ifstream in(a.source);
  if (!in) fail(ErrorKind::MissingFile, a.source);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::BadHeader, "empty file " + a.source);
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  for (auto cell : detail::split_csv_line(line)) header.emplace_back(detail::trim(cell));

  std::vector<std::optional<std::size_t>> source_index(kTrialColumns.size());
  for (std::size_t c = 0; c < kTrialColumns.size(); ++c) {
    const std::string canonical(kTrialColumns[c]);
    const std::string wanted = mapping.contains(canonical) ? mapping[canonical] : canonical;
    for (std::size_t h = 0; h < header.size(); ++h) {
      if (header[h] == wanted) source_index[c] = h;
    }
    if (!source_index[c] && canonical != "insp_start") {
      fail(ErrorKind::BadHeader, "source has no column '" + wanted + "' for " + canonical);
    }
  }

  TrialRecord r;
  r.meta.subject = subject;
  r.meta.breathing_type = *type;
  r.meta.peep_cmh2o = a.peep;
  r.meta.nominal_fs = a.fs;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) fail(ErrorKind::RaggedRow, "row " + std::to_string(row));
    std::array<double, 7> v{};
    for (std::size_t c = 0; c < kTrialColumns.size(); ++c) {
      if (!source_index[c]) continue;
      const auto parsed = detail::parse_cell(detail::trim(cells[*source_index[c]]));
      if (!parsed) fail(ErrorKind::InvalidRecord, "row " + std::to_string(row) + ": unparsable " + std::string(kTrialColumns[c]));
      v[c] = *parsed;
    }
    r.time.push_back(v[0] * a.time_scale);
    r.pressure.push_back(v[1]);
    r.flow.push_back(v[2]);
    r.tidal_volume.push_back(v[3]);
    if (std::isfinite(v[4]) && v[4] != 0.0) r.insp_starts.push_back(r.time.size() - 1);
    r.chest_circ.push_back(v[5]);
    r.abdomen_circ.push_back(v[6]);
  }
  r.meta.duration_s = static_cast<double>(r.size()) / a.fs;
  validate(r);

  const std::filesystem::path dir(a.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir / "trials", ec);
  if (ec) fail(ErrorKind::IoFailure, "cannot create " + (dir / "trials").string() + ": " + ec.message());
  const auto manifest_path = dir / "manifest.json";
  DatasetManifest manifest;
  if (std::filesystem::exists(manifest_path)) {
    manifest = load_manifest(manifest_path);
  } else {
    manifest.provenance = a.provenance;
  }
  for (const auto& e : manifest.trials) {
    if (e.meta.trial_id() == r.meta.trial_id()) fail(ErrorKind::DuplicateTrial, r.meta.trial_id());
  }
  const auto trial_path = dir / "trials" / (r.meta.trial_id() + ".csv");
  write_trial(r, trial_path);
  manifest.trials.push_back({trial_path, r.meta});
  write_manifest(manifest, manifest_path);
  out << "ingested " << r.size() << " rows as " << r.meta.trial_id() << "\n";
  return kExitOk;
}

struct BrArgs {
  std::string manifest;
  std::string selector;
  FrequencyBand band;
};

inline int cmd_br(const BrArgs& a, std::ostream& out) {
  const auto rows = br_table(load_manifest(a.manifest), a.selector, a.band);
  if (rows.empty()) fail(ErrorKind::MissingFile, "no trial matches '" + a.selector + "'");
  out << br_table_csv(rows);
  return kExitOk;
}

/// Runs the pipeline; writes outputs only after every stage succeeded.
inline int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const auto outcome = run_pipeline(config);
  write_run_outputs(outcome, config.out_dir);
  for (const auto& w : outcome.report.at("warnings")) err << "warning: " << w.get<std::string>() << "\n";
  for (const auto& r : outcome.report.at("results")) {
    out << r.at("model").get<std::string>() << " br=" << (r.at("includes_br").get<bool>() ? "yes" : "no") << " "
        << r.at("splitter").get<std::string>() << " accuracy=" << r.at("accuracy_mean").get<double>() << "\n";
  }
  if (outcome.skipped_folds && config.strict) {
    err << "error: folds were skipped and --strict is set\n";
    return kExitSkippedFolds;
  }
  return kExitOk;
}

/// Parses `args` (without the program name) and dispatches.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Respiratory signal toolkit: breathing-rate estimation and breathing-type classification"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic cohort (trial CSVs + manifest.json)");
  generate->add_option("--spec", gen.spec_file, "Cohort spec JSON (defaults apply when omitted)")->check(CLI::ExistingFile);
  generate->add_option("--out", gen.out_dir, "Output directory")->required();
  generate->add_option("--seed", gen.seed, "Override the cohort spec's seed");
  generate->add_option("--subjects", gen.subjects, "Override the number of subjects");

  IngestArgs ing;
  auto* ingest = app.add_subcommand("ingest", "Convert a CSV recording into a trial and add it to a manifest");
  ingest->add_option("--source", ing.source, "Source CSV with a header row")->required();
  ingest->add_option("--map", ing.column_map, "Column mapping canonical=source (repeatable)");
  ingest->add_option("--time-scale", ing.time_scale, "Multiplier converting source time to seconds");
  ingest->add_option("--subject", ing.subject_json, "Subject metadata JSON")->required();
  ingest->add_option("--type", ing.breathing_type, "Breathing type: normal, panting or deep")->required();
  ingest->add_option("--peep", ing.peep, "PEEP setting [cmH2O]");
  ingest->add_option("--fs", ing.fs, "Nominal sampling rate [Hz]");
  ingest->add_option("--out", ing.out_dir, "Dataset directory holding manifest.json")->required();
  ingest->add_option("--provenance", ing.provenance, "Provenance string for a new manifest");

  BrArgs br;
  auto* brc = app.add_subcommand("br", "Print per-trial breathing-rate estimates as CSV");
  brc->add_option("--manifest", br.manifest, "Manifest JSON")->required();
  brc->add_option("--trial", br.selector, "Substring selecting trial ids (all when omitted)");
  brc->add_option("--br-band-lo", br.band.lo_hz, "Lower edge of the search band [Hz]");
  brc->add_option("--br-band-hi", br.band.hi_hz, "Upper edge of the search band [Hz]");

  RunConfig cfg;
  std::string manifest, synthetic, include_br = "both", splitter = "kfold", br_channel = "tidal_volume";
  std::vector<std::string> models = {"forest", "logreg", "svm"};
  std::string max_depth = "unlimited", gamma = "scale";
  std::uint64_t seed = 0;
  auto* runc = app.add_subcommand("run", "Run the feature + cross-validation experiment grid");
  auto* in_manifest = runc->add_option("--manifest", manifest, "Manifest JSON");
  auto* in_synth = runc->add_option("--synthetic", synthetic, "Cohort spec JSON, or 'default'");
  in_manifest->excludes(in_synth);
  runc->add_option("--seed", seed, "Master seed (required)")->required();
  runc->add_option("--out", cfg.out_dir, "Output directory")->required();
  runc->add_option("--window-s", cfg.window.window_s, "Window length [s]");
  runc->add_option("--overlap", cfg.window.overlap_fraction, "Window overlap fraction in [0, 1)");
  runc->add_option("--br-band-lo", cfg.br_band.lo_hz, "Lower edge of the BR search band [Hz]");
  runc->add_option("--br-band-hi", cfg.br_band.hi_hz, "Upper edge of the BR search band [Hz]");
  runc->add_option("--br-channel", br_channel, "Channel for the BR feature: pressure, flow, tidal_volume");
  runc->add_option("--include-br", include_br, "true, false or both");
  runc->add_option("--models", models, "Subset of forest, logreg, svm")->delimiter(',');
  runc->add_option("--splitter", splitter, "loocv or kfold");
  runc->add_option("-k,--folds", cfg.k, "Number of folds for kfold");
  runc->add_flag("!--no-stratify", cfg.stratified, "Disable class stratification of k-fold");
  runc->add_flag("--group-by-subject", cfg.group_by_subject, "Also evaluate subject-grouped splits");
  runc->add_flag("--strict", cfg.strict, "Exit 1 when any fold was skipped");
  runc->add_flag("--tune-forest", cfg.tune_forest, "Grid-search forest size/depth by inner CV");
  runc->add_flag("!--no-plots", cfg.plots, "Skip SVG output");
  runc->add_option("--threads", cfg.threads, "Worker threads (0 = all cores)");
  runc->add_option("--n-trees", cfg.hyperparams.forest.n_trees, "Forest size");
  runc->add_option("--max-depth", max_depth, "Tree depth limit or 'unlimited'");
  runc->add_option("--min-samples-split", cfg.hyperparams.forest.tree.min_samples_split, "Minimum node size to split");
  runc->add_option("--lr", cfg.hyperparams.logreg.learning_rate, "Logistic regression learning rate");
  runc->add_option("--l2", cfg.hyperparams.logreg.l2_lambda, "Logistic regression L2 strength");
  runc->add_option("--max-iters", cfg.hyperparams.logreg.max_iters, "Logistic regression iterations");
  runc->add_option("--svm-c", cfg.hyperparams.svm.c, "SVM box constraint");
  runc->add_option("--svm-gamma", gamma, "RBF gamma or 'scale'");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*generate) return cmd_generate(gen, out);
    if (*ingest) return cmd_ingest(ing, out);
    if (*brc) return cmd_br(br, out);

    // run: resolve string options before anything touches disk.
    if (!manifest.empty()) {
      cfg.manifest = manifest;
    } else if (!synthetic.empty() && synthetic != "default") {
      cfg.synthetic_spec = synthetic;
    } else {
      cfg.synthetic_default = true;
    }
    cfg.seed = seed;
    cfg.models.clear();
    for (const auto& m : models) {
      const auto kind = parse_model_kind(m);
      if (!kind) fail(ErrorKind::InvalidConfig, "unknown model '" + m + "'");
      if (std::find(cfg.models.begin(), cfg.models.end(), *kind) == cfg.models.end()) cfg.models.push_back(*kind);
    }
    if (include_br == "true") {
      cfg.include_br = IncludeBr::Yes;
    } else if (include_br == "false") {
      cfg.include_br = IncludeBr::No;
    } else if (include_br == "both") {
      cfg.include_br = IncludeBr::Both;
    } else {
      fail(ErrorKind::InvalidConfig, "--include-br must be true, false or both");
    }
    if (splitter == "loocv") {
      cfg.splitter = SplitterKind::Loocv;
    } else if (splitter == "kfold") {
      cfg.splitter = SplitterKind::Kfold;
    } else {
      fail(ErrorKind::InvalidConfig, "unknown splitter '" + splitter + "'");
    }
    const auto channel = parse_br_channel(br_channel);
    if (!channel) fail(ErrorKind::InvalidConfig, "unknown BR channel '" + br_channel + "'");
    cfg.br_channel = *channel;
    if (max_depth == "unlimited") {
      cfg.hyperparams.forest.tree.max_depth = kUnlimitedDepth;
    } else {
      try {
        cfg.hyperparams.forest.tree.max_depth = std::stoi(max_depth);
      } catch (const std::exception&) {
        fail(ErrorKind::InvalidConfig, "--max-depth must be an integer or 'unlimited'");
      }
    }
    if (gamma != "scale") {
      try {
        cfg.hyperparams.svm.gamma = std::stod(gamma);
      } catch (const std::exception&) {
        fail(ErrorKind::InvalidConfig, "--svm-gamma must be a number or 'scale'");
      }
    }
    return cmd_run(cfg, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace respira::cli
