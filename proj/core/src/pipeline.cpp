#include "alsprog/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "alsprog/csv.hpp"
#include "alsprog/error.hpp"
#include "alsprog/rng.hpp"
#include "alsprog/synth.hpp"

namespace alsprog {

namespace {

namespace fs = std::filesystem;

void write_manifest(const PipelineConfig& cfg, const std::string& stage,
                    const std::vector<fs::path>& inputs) {
  nlohmann::json j;
  j["stage"] = stage;
  j["config_hash"] = cfg.hash();
  j["seed"] = cfg.seed;
  nlohmann::json in = nlohmann::json::object();
  for (const auto& p : inputs)
    if (fs::exists(p)) in[p.filename().string()] = csv::file_digest(p);
  j["inputs"] = in;
  csv::write_text_atomic(cfg.out_dir / (stage + "_manifest.json"), j.dump(2) + "\n");
}

struct InputPaths {
  fs::path statics, visits, sensors;
};

InputPaths input_paths(const PipelineConfig& cfg) {
  const fs::path base = cfg.synth ? cfg.out_dir / "synth" : cfg.input_dir;
  return {base / "static.csv", base / "visits.csv", base / "sensors.csv"};
}

void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw DataError("missing input file " + p.string());
}

// ---- in-memory chain pieces -------------------------------------------

struct IngestOut {
  Cohort cohort;  // statics imputed
};

IngestOut ingest_from_inputs(const PipelineConfig& cfg) {
  const InputPaths in = input_paths(cfg);
  require_file(in.statics);
  require_file(in.visits);
  require_file(in.sensors);
  IngestOut out;
  out.cohort = load_cohort(in.statics, in.visits, in.sensors);
  out.cohort.statics = impute_static(std::move(out.cohort.statics));
  return out;
}

void write_ingest_artifacts(const PipelineConfig& cfg, const Cohort& cohort) {
  write_static_csv(cfg.out_dir / artifact::kStaticImputed, cohort.statics);
  write_visits_csv(cfg.out_dir / artifact::kVisitsClean, cohort.visits);
  write_sensors_csv(cfg.out_dir / artifact::kSensorsClean, cohort.series);
}

Cohort read_ingest_artifacts(const PipelineConfig& cfg) {
  return load_cohort(cfg.out_dir / artifact::kStaticImputed,
                     cfg.out_dir / artifact::kVisitsClean,
                     cfg.out_dir / artifact::kSensorsClean);
}

struct AlignOut {
  std::vector<AlignedPatient> aligned;  // sorted by patient_id
  std::vector<FollowupEntry> profile;
};

AlignOut align_in_memory(const PipelineConfig& cfg, const Cohort& cohort) {
  AlignOut out;
  out.aligned = align_cohort(cohort, SyncConfig{cfg.tail_max_gap_days});
  out.profile = cohort_followup_profile(out.aligned);
  return out;
}

void write_align_artifacts(const PipelineConfig& cfg, const AlignOut& aligned) {
  write_audit_csv(cfg.out_dir / artifact::kAlignAudit, aligned.aligned);

  std::vector<VisitRecord> kept;
  std::vector<SensorSeries> series;
  for (const auto& p : aligned.aligned) {
    kept.insert(kept.end(), p.visits.begin(), p.visits.end());
    series.insert(series.end(), p.series.begin(), p.series.end());
  }
  write_visits_csv(cfg.out_dir / artifact::kAlignedVisits, kept);
  write_sensors_csv(cfg.out_dir / artifact::kAlignedSensors, series);

  std::vector<std::string> header = {"patient_id", "sensor_first_day",
                                     "sensor_last_day", "clinical_first_day",
                                     "exclusion"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : aligned.aligned) {
    rows.push_back(
        {p.patient_id,
         p.sensor_first_day ? csv::format_int(*p.sensor_first_day) : "",
         p.sensor_last_day ? csv::format_int(*p.sensor_last_day) : "",
         p.clinical_first_day ? csv::format_int(*p.clinical_first_day) : "",
         to_string(p.exclusion)});
  }
  csv::write_file(cfg.out_dir / artifact::kAlignedMeta, header, rows);
  write_followup_csv(cfg.out_dir / artifact::kFollowupProfile, aligned.profile);
}

std::vector<AlignedPatient> read_align_artifacts(const PipelineConfig& cfg) {
  const csv::Table meta = csv::read_file(cfg.out_dir / artifact::kAlignedMeta);
  const Cohort parts = load_cohort(cfg.out_dir / artifact::kStaticImputed,
                                   cfg.out_dir / artifact::kAlignedVisits,
                                   cfg.out_dir / artifact::kAlignedSensors);

  std::map<std::string, std::vector<VisitRecord>> visits_by;
  for (const auto& v : parts.visits) visits_by[v.patient_id].push_back(v);
  std::map<std::string, std::vector<SensorSeries>> series_by;
  for (const auto& s : parts.series) series_by[s.patient_id].push_back(s);

  std::vector<AlignedPatient> out;
  for (const auto& row : meta.rows) {
    AlignedPatient p;
    p.patient_id = row[0];
    if (!row[1].empty()) p.sensor_first_day = csv::parse_int(row[1], "meta");
    if (!row[2].empty()) p.sensor_last_day = csv::parse_int(row[2], "meta");
    if (!row[3].empty()) p.clinical_first_day = csv::parse_int(row[3], "meta");
    if (row[4] == "none") p.exclusion = ExclusionReason::none;
    else if (row[4] == "no_clinician_visits")
      p.exclusion = ExclusionReason::no_clinician_visits;
    else if (row[4] == "single_visit_patient")
      p.exclusion = ExclusionReason::single_visit_patient;
    else
      throw DataError("aligned_meta: unknown exclusion '" + row[4] + "'");
    if (auto it = visits_by.find(p.patient_id); it != visits_by.end()) {
      p.visits = std::move(it->second);
      std::sort(p.visits.begin(), p.visits.end(),
                [](const VisitRecord& a, const VisitRecord& b) { return a.day < b.day; });
    }
    if (auto it = series_by.find(p.patient_id); it != series_by.end())
      p.series = std::move(it->second);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<VisitRecord> self_visits_of(const Cohort& cohort) {
  std::vector<VisitRecord> out;
  for (const auto& v : cohort.visits)
    if (v.source == Source::self_assessment) out.push_back(v);
  return out;
}

struct ExtractOut {
  FeatureMatrix clinical;
  std::optional<FeatureMatrix> augmented;
};

ExtractOut extract_in_memory(const PipelineConfig& cfg,
                             std::span<const AlignedPatient> aligned,
                             std::span<const StaticRecord> statics,
                             std::span<const VisitRecord> self_visits,
                             std::span<const MergeDecision> decisions) {
  ExtractOut out;
  const StaticEncoder encoder = StaticEncoder::fit(statics);
  const auto windows = clinical_windows(aligned);
  out.clinical = build_feature_matrix(aligned, windows, statics, encoder,
                                      cfg.feature_mode, cfg.threads);
  if (cfg.augment) {
    const AugmentConfig acfg{cfg.augment_alpha, cfg.horizon_min_days,
                             cfg.tail_max_gap_days};
    const auto aug_windows =
        augmented_windows(aligned, self_visits, decisions, acfg);
    out.augmented = build_feature_matrix(aligned, aug_windows, statics, encoder,
                                         cfg.feature_mode, cfg.threads);
  }
  return out;
}

struct TrainOut {
  TrainedBundle bundle;
  std::vector<std::string> holdout_patients;
};

TrainOut train_in_memory(const PipelineConfig& cfg, const FeatureMatrix& clinical,
                         const std::optional<FeatureMatrix>& augmented) {
  std::set<std::string> ids;
  for (const auto& k : clinical.keys) ids.insert(k.patient_id);
  std::vector<std::string> all_ids(ids.begin(), ids.end());

  TrainOut out;
  std::vector<std::string> train_ids = all_ids;
  if (cfg.holdout_frac > 0) {
    auto [train, holdout] = holdout_split(all_ids, cfg.holdout_frac, cfg.seed);
    train_ids = std::move(train);
    out.holdout_patients = std::move(holdout);
  }

  const auto train_rows = rows_for_patients(clinical, train_ids);
  const FeatureMatrix train_clinical = subset_rows(clinical, train_rows);
  std::optional<FeatureMatrix> train_augmented;
  if (augmented) {
    const auto aug_rows = rows_for_patients(*augmented, train_ids);
    train_augmented = subset_rows(*augmented, aug_rows);
  }

  const FoldPlan plan =
      plan_folds(train_ids, cfg.outer_k, cfg.inner_k, cfg.seed);
  out.bundle = train_bundle(train_clinical,
                            train_augmented ? &*train_augmented : nullptr, plan,
                            cfg.harness(cfg.threads));
  return out;
}

}  // namespace

std::vector<AlignedPatient> align_cohort(const Cohort& cohort,
                                         const SyncConfig& sync_cfg) {
  std::map<std::string, std::vector<VisitRecord>> visits_by;
  std::set<std::string> ids;
  for (const auto& v : cohort.visits) {
    ids.insert(v.patient_id);
    if (v.source == Source::clinician) visits_by[v.patient_id].push_back(v);
  }
  std::map<std::string, std::vector<SensorSeries>> series_by;
  for (const auto& s : cohort.series) {
    ids.insert(s.patient_id);
    series_by[s.patient_id].push_back(s);
  }
  for (const auto& r : cohort.statics) ids.insert(r.patient_id);

  std::vector<AlignedPatient> out;
  for (const auto& id : ids) {
    auto visits = visits_by.count(id) ? visits_by[id] : std::vector<VisitRecord>{};
    auto series = series_by.count(id) ? series_by[id] : std::vector<SensorSeries>{};
    out.push_back(align(id, std::move(visits), std::move(series), sync_cfg));
  }
  return out;
}

std::vector<ObservationWindow> clinical_windows(
    std::span<const AlignedPatient> aligned) {
  std::vector<ObservationWindow> out;
  for (const auto& p : aligned) {
    const auto w = build_windows(p);
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

void write_audit_csv(const std::filesystem::path& path,
                     std::span<const AlignedPatient> aligned) {
  const std::vector<std::string> header = {"patient_id", "day", "action", "reason"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : aligned) {
    for (const auto& d : p.dropped)
      rows.push_back({p.patient_id, csv::format_int(d.day), "drop_visit",
                      to_string(d.reason)});
    if (!p.usable())
      rows.push_back({p.patient_id, "", "exclude_patient", to_string(p.exclusion)});
  }
  csv::write_file(path, header, rows);
}

void write_merge_decisions_csv(const std::filesystem::path& path,
                               std::span<const MergeDecision> decisions) {
  const std::vector<std::string> header = {"patient_id", "question", "stat",
                                           "dof", "p", "merged", "reason"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& d : decisions) {
    rows.push_back({d.patient_id, csv::format_int(d.question.index()),
                    csv::format_double(d.chi2_statistic), csv::format_int(d.dof),
                    csv::format_double(d.p_value), d.merged ? "1" : "0",
                    to_string(d.reason)});
  }
  csv::write_file(path, header, rows);
}

std::vector<MergeDecision> read_merge_decisions_csv(
    const std::filesystem::path& path) {
  const csv::Table t = csv::read_file(path);
  std::vector<MergeDecision> out;
  for (const auto& row : t.rows) {
    MergeDecision d;
    d.patient_id = row[0];
    d.question = QuestionId(csv::parse_int(row[1], "merge_decisions"));
    d.chi2_statistic = csv::parse_double(row[2], "merge_decisions");
    d.dof = csv::parse_int(row[3], "merge_decisions");
    d.p_value = csv::parse_double(row[4], "merge_decisions");
    d.merged = row[5] == "1";
    if (row[6] == "merged") d.reason = MergeReason::merged;
    else if (row[6] == "rejected_distribution")
      d.reason = MergeReason::rejected_distribution;
    else if (row[6] == "untestable")
      d.reason = MergeReason::untestable;
    else
      throw DataError("merge_decisions: unknown reason '" + row[6] + "'");
    out.push_back(std::move(d));
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, const EvalOutput& eval) {
  const std::vector<std::string> header = {"question", "rmse", "mae", "n"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& [question, report] : eval.per_question)
    rows.push_back({csv::format_int(question), csv::format_double(report.rmse),
                    csv::format_double(report.mae), csv::format_int(report.n)});
  rows.push_back({"ALL", csv::format_double(eval.overall.rmse),
                  csv::format_double(eval.overall.mae),
                  csv::format_int(eval.overall.n)});
  csv::write_file(path, header, rows);
}

void write_predictions_csv(const std::filesystem::path& path,
                           std::span<const EvalPrediction> predictions) {
  const std::vector<std::string> header = {"patient_id", "question", "window_start",
                                           "window_end", "prediction"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : predictions)
    rows.push_back({p.key.patient_id, csv::format_int(p.key.question),
                    csv::format_int(p.key.window_start),
                    csv::format_int(p.key.window_end), csv::format_int(p.rounded)});
  csv::write_file(path, header, rows);
}

void write_relevance_csv(const std::filesystem::path& path,
                         std::span<const RelevanceReport> reports) {
  const std::vector<std::string> header = {"question", "feature", "rho",
                                           "p",        "p_adj",   "selected"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& report : reports) {
    for (const auto& r : report.rows) {
      rows.push_back({csv::format_int(report.question), r.feature,
                      r.testable ? csv::format_double(r.rho) : "",
                      r.testable ? csv::format_double(r.p) : "",
                      r.testable ? csv::format_double(r.p_adj) : "",
                      r.selected ? "1" : "0"});
    }
  }
  csv::write_file(path, header, rows);
}

void write_importance_csv(const std::filesystem::path& path,
                          const TrainedBundle& bundle) {
  const std::vector<std::string> header = {"question", "candidate", "feature",
                                           "importance", "rank"};
  std::vector<std::vector<std::string>> rows;
  for (const QuestionId q : QuestionId::all()) {
    const auto& model = bundle.report_models[q.offset()];
    if (!model.has_value()) continue;
    const ImportanceReport report = importance(model->model);
    for (const auto& e : report.entries)
      rows.push_back({csv::format_int(q.index()), model->candidate_id, e.feature,
                      csv::format_double(e.importance), csv::format_int(e.rank)});
  }
  csv::write_file(path, header, rows);
}

void write_followup_csv(const std::filesystem::path& path,
                        std::span<const FollowupEntry> profile) {
  std::vector<std::string> header = {"followup_index", "n_patients"};
  for (int q = 1; q <= QuestionId::kCount; ++q) {
    header.push_back("q" + std::to_string(q) + "_mean");
    header.push_back("q" + std::to_string(q) + "_n");
    header.push_back("q" + std::to_string(q) + "_ci95");
  }
  std::vector<std::vector<std::string>> rows;
  for (const auto& e : profile) {
    std::vector<std::string> row = {csv::format_int(e.followup_index),
                                    csv::format_int(e.n_patients)};
    for (const auto& m : e.per_question) {
      if (!m.has_value()) {
        row.push_back("");
        row.push_back("0");
        row.push_back("");
        continue;
      }
      row.push_back(csv::format_double(m->mean));
      row.push_back(csv::format_int(m->n));
      row.push_back(m->ci_half_width ? csv::format_double(*m->ci_half_width) : "");
    }
    rows.push_back(std::move(row));
  }
  csv::write_file(path, header, rows);
}

std::pair<std::vector<std::string>, std::vector<std::string>> holdout_split(
    std::vector<std::string> patient_ids, double frac, std::uint64_t seed) {
  std::sort(patient_ids.begin(), patient_ids.end());
  Rng rng = Rng(seed).substream("holdout");
  rng.shuffle(patient_ids);
  const std::size_t n_holdout =
      static_cast<std::size_t>(std::floor(frac * static_cast<double>(patient_ids.size())));
  std::vector<std::string> holdout(patient_ids.begin(),
                                   patient_ids.begin() + n_holdout);
  std::vector<std::string> train(patient_ids.begin() + n_holdout, patient_ids.end());
  std::sort(holdout.begin(), holdout.end());
  std::sort(train.begin(), train.end());
  return {train, holdout};
}

// ---- stage entry points -------------------------------------------------

StageResult run_synth(const PipelineConfig& cfg) {
  SynthConfig scfg = synth_preset(cfg.synth_preset, cfg.synth_patients, cfg.seed);
  scfg.self_fraction = cfg.synth_self_fraction;
  scfg.disagreement_fraction = cfg.synth_disagreement;
  const SynthOutput out = generate(scfg, cfg.out_dir / "synth");
  write_manifest(cfg, "synth", {});
  return StageResult{{out.static_csv.string(), out.visits_csv.string(),
                      out.sensors_csv.string(), out.manifest_json.string()},
                     {}};
}

StageResult run_ingest(const PipelineConfig& cfg) {
  const InputPaths in = input_paths(cfg);
  const IngestOut ingest = ingest_from_inputs(cfg);
  write_ingest_artifacts(cfg, ingest.cohort);
  write_manifest(cfg, "ingest", {in.statics, in.visits, in.sensors});
  return StageResult{{(cfg.out_dir / artifact::kStaticImputed).string(),
                      (cfg.out_dir / artifact::kVisitsClean).string(),
                      (cfg.out_dir / artifact::kSensorsClean).string()},
                     ingest.cohort.warnings};
}

StageResult run_align(const PipelineConfig& cfg) {
  const Cohort cohort = read_ingest_artifacts(cfg);
  const AlignOut aligned = align_in_memory(cfg, cohort);
  write_align_artifacts(cfg, aligned);
  write_manifest(cfg, "align",
                 {cfg.out_dir / artifact::kStaticImputed,
                  cfg.out_dir / artifact::kVisitsClean,
                  cfg.out_dir / artifact::kSensorsClean});
  return StageResult{{(cfg.out_dir / artifact::kAlignAudit).string(),
                      (cfg.out_dir / artifact::kAlignedVisits).string(),
                      (cfg.out_dir / artifact::kAlignedSensors).string(),
                      (cfg.out_dir / artifact::kAlignedMeta).string(),
                      (cfg.out_dir / artifact::kFollowupProfile).string()},
                     {}};
}

StageResult run_augment(const PipelineConfig& cfg) {
  const Cohort cohort = read_ingest_artifacts(cfg);
  const auto aligned = read_align_artifacts(cfg);
  const auto self = self_visits_of(cohort);
  const AugmentConfig acfg{cfg.augment_alpha, cfg.horizon_min_days,
                           cfg.tail_max_gap_days};
  StageResult result;
  const auto decisions = decide_merges(aligned, self, acfg, &result.warnings);
  write_merge_decisions_csv(cfg.out_dir / artifact::kMergeDecisions, decisions);
  write_manifest(cfg, "augment",
                 {cfg.out_dir / artifact::kVisitsClean,
                  cfg.out_dir / artifact::kAlignedVisits});
  result.artifacts = {(cfg.out_dir / artifact::kMergeDecisions).string()};
  return result;
}

StageResult run_extract(const PipelineConfig& cfg) {
  const Cohort cohort = read_ingest_artifacts(cfg);
  const auto aligned = read_align_artifacts(cfg);
  const auto self = self_visits_of(cohort);
  std::vector<MergeDecision> decisions;
  if (cfg.augment)
    decisions = read_merge_decisions_csv(cfg.out_dir / artifact::kMergeDecisions);
  const ExtractOut out =
      extract_in_memory(cfg, aligned, cohort.statics, self, decisions);
  write_features_csv(cfg.out_dir / artifact::kFeatures, out.clinical);
  StageResult result;
  result.artifacts.push_back((cfg.out_dir / artifact::kFeatures).string());
  if (out.augmented) {
    write_features_csv(cfg.out_dir / artifact::kFeaturesAugmented, *out.augmented);
    result.artifacts.push_back(
        (cfg.out_dir / artifact::kFeaturesAugmented).string());
  }
  write_manifest(cfg, "extract",
                 {cfg.out_dir / artifact::kAlignedVisits,
                  cfg.out_dir / artifact::kAlignedSensors,
                  cfg.out_dir / artifact::kStaticImputed});
  return result;
}

StageResult run_select_features(const PipelineConfig& cfg) {
  const FeatureMatrix m = read_features_csv(cfg.out_dir / artifact::kFeatures);
  std::vector<RelevanceReport> reports;
  for (const QuestionId q : QuestionId::all()) {
    const auto rows = rows_for_question(m, q);
    if (rows.empty()) continue;
    const FeatureMatrix qm = subset_rows(m, rows);
    const ColumnTransform t = fit_prune(qm, cfg.prune());
    const FeatureMatrix imputed = apply_transform(qm, t);
    reports.push_back(relevance_for_question(imputed, q, cfg.selection()));
  }
  write_relevance_csv(cfg.out_dir / artifact::kRelevance, reports);
  write_manifest(cfg, "select-features", {cfg.out_dir / artifact::kFeatures});
  return StageResult{{(cfg.out_dir / artifact::kRelevance).string()}, {}};
}

StageResult run_train(const PipelineConfig& cfg) {
  const FeatureMatrix clinical =
      read_features_csv(cfg.out_dir / artifact::kFeatures);
  std::optional<FeatureMatrix> augmented;
  if (cfg.augment)
    augmented = read_features_csv(cfg.out_dir / artifact::kFeaturesAugmented);
  const TrainOut out = train_in_memory(cfg, clinical, augmented);
  write_bundle(cfg.out_dir / artifact::kBundleDir, out.bundle);
  write_manifest(cfg, "train", {cfg.out_dir / artifact::kFeatures});
  return StageResult{{(cfg.out_dir / artifact::kBundleDir).string()}, {}};
}

StageResult run_evaluate(const PipelineConfig& cfg) {
  const FeatureMatrix m = read_features_csv(cfg.out_dir / artifact::kFeatures);
  const TrainedBundle bundle = read_bundle(cfg.out_dir / artifact::kBundleDir);
  StageResult result;
  const EvalOutput eval =
      evaluate_bundle(bundle, m, cfg.rounded_metrics, &result.warnings);
  write_metrics_csv(cfg.out_dir / artifact::kMetrics, eval);
  write_predictions_csv(cfg.out_dir / artifact::kPredictions, eval.predictions);
  write_manifest(cfg, "evaluate", {cfg.out_dir / artifact::kFeatures});
  result.artifacts = {(cfg.out_dir / artifact::kMetrics).string(),
                      (cfg.out_dir / artifact::kPredictions).string()};
  return result;
}

StageResult run_predict(const PipelineConfig& cfg) {
  const FeatureMatrix m =
      read_features_csv(cfg.out_dir / artifact::kFeatures, false);
  const TrainedBundle bundle = read_bundle(cfg.out_dir / artifact::kBundleDir);
  std::vector<EvalPrediction> predictions;
  for (const QuestionId q : QuestionId::all()) {
    const QuestionPredictor& predictor = bundle.predictors[q.offset()];
    for (const std::size_t r : rows_for_question(m, q)) {
      const double raw = predict_row(predictor, m, r);
      predictions.push_back(
          EvalPrediction{m.keys[r], raw, postprocess(raw).value(), 0});
    }
  }
  write_predictions_csv(cfg.out_dir / artifact::kPredictions, predictions);
  write_manifest(cfg, "predict", {cfg.out_dir / artifact::kFeatures});
  return StageResult{{(cfg.out_dir / artifact::kPredictions).string()}, {}};
}

StageResult run_report(const PipelineConfig& cfg) {
  const TrainedBundle bundle = read_bundle(cfg.out_dir / artifact::kBundleDir);
  write_importance_csv(cfg.out_dir / artifact::kImportance, bundle);
  write_manifest(cfg, "report", {});
  return StageResult{{(cfg.out_dir / artifact::kImportance).string()}, {}};
}

StageResult run_pipeline(const PipelineConfig& cfg) {
  StageResult result;
  if (cfg.synth) {
    const auto r = run_synth(cfg);
    result.artifacts.insert(result.artifacts.end(), r.artifacts.begin(),
                            r.artifacts.end());
  }

  const InputPaths in = input_paths(cfg);
  const IngestOut ingest = ingest_from_inputs(cfg);
  write_ingest_artifacts(cfg, ingest.cohort);
  result.warnings.insert(result.warnings.end(), ingest.cohort.warnings.begin(),
                         ingest.cohort.warnings.end());

  const AlignOut aligned = align_in_memory(cfg, ingest.cohort);
  write_align_artifacts(cfg, aligned);

  const auto self = self_visits_of(ingest.cohort);
  std::vector<MergeDecision> decisions;
  if (cfg.augment) {
    const AugmentConfig acfg{cfg.augment_alpha, cfg.horizon_min_days,
                             cfg.tail_max_gap_days};
    decisions = decide_merges(aligned.aligned, self, acfg, &result.warnings);
    write_merge_decisions_csv(cfg.out_dir / artifact::kMergeDecisions, decisions);
  }

  const ExtractOut extracted = extract_in_memory(cfg, aligned.aligned,
                                                 ingest.cohort.statics, self,
                                                 decisions);
  write_features_csv(cfg.out_dir / artifact::kFeatures, extracted.clinical);
  if (extracted.augmented)
    write_features_csv(cfg.out_dir / artifact::kFeaturesAugmented,
                       *extracted.augmented);

  // whole-data relevance report
  {
    std::vector<RelevanceReport> reports;
    for (const QuestionId q : QuestionId::all()) {
      const auto rows = rows_for_question(extracted.clinical, q);
      if (rows.empty()) continue;
      const FeatureMatrix qm = subset_rows(extracted.clinical, rows);
      const ColumnTransform t = fit_prune(qm, cfg.prune());
      const FeatureMatrix imputed = apply_transform(qm, t);
      reports.push_back(relevance_for_question(imputed, q, cfg.selection()));
    }
    write_relevance_csv(cfg.out_dir / artifact::kRelevance, reports);
  }

  const TrainOut trained =
      train_in_memory(cfg, extracted.clinical, extracted.augmented);
  write_bundle(cfg.out_dir / artifact::kBundleDir, trained.bundle);
  write_importance_csv(cfg.out_dir / artifact::kImportance, trained.bundle);

  // evaluation set: the holdout patients when configured, else everything
  FeatureMatrix eval_matrix = extracted.clinical;
  if (!trained.holdout_patients.empty()) {
    const auto rows = rows_for_patients(extracted.clinical, trained.holdout_patients);
    eval_matrix = subset_rows(extracted.clinical, rows);
  }
  const EvalOutput eval = evaluate_bundle(trained.bundle, eval_matrix,
                                          cfg.rounded_metrics, &result.warnings);
  write_metrics_csv(cfg.out_dir / artifact::kMetrics, eval);
  write_predictions_csv(cfg.out_dir / artifact::kPredictions, eval.predictions);

  write_manifest(cfg, "pipeline", {in.statics, in.visits, in.sensors});
  for (const char* name :
       {artifact::kFeatures, artifact::kRelevance, artifact::kMetrics,
        artifact::kPredictions, artifact::kImportance})
    result.artifacts.push_back((cfg.out_dir / name).string());
  result.artifacts.push_back((cfg.out_dir / artifact::kBundleDir).string());
  return result;
}

}  // namespace alsprog
