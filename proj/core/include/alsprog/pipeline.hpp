#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "alsprog/augment.hpp"
#include "alsprog/config.hpp"
#include "alsprog/core.hpp"
#include "alsprog/featurize.hpp"
#include "alsprog/harness.hpp"
#include "alsprog/ingest.hpp"
#include "alsprog/sync.hpp"

namespace alsprog {

// Stage entry points. Each one consumes the persisted artifacts of its
// predecessors (so stages can be re-run independently) and writes its own
// artifacts plus a <stage>_manifest.json capturing the config hash, seed
// and input digests. The `pipeline` entry chains everything in memory;
// both paths produce byte-identical artifacts.

struct StageResult {
  std::vector<std::string> artifacts;  // paths written
  std::vector<std::string> warnings;
};

StageResult run_synth(const PipelineConfig& cfg);
StageResult run_ingest(const PipelineConfig& cfg);
StageResult run_align(const PipelineConfig& cfg);
StageResult run_augment(const PipelineConfig& cfg);
StageResult run_extract(const PipelineConfig& cfg);
StageResult run_select_features(const PipelineConfig& cfg);
StageResult run_train(const PipelineConfig& cfg);
StageResult run_evaluate(const PipelineConfig& cfg);
StageResult run_predict(const PipelineConfig& cfg);
StageResult run_report(const PipelineConfig& cfg);
StageResult run_pipeline(const PipelineConfig& cfg);

// Artifact names inside cfg.out_dir.
namespace artifact {
inline constexpr const char* kStaticImputed = "static_imputed.csv";
inline constexpr const char* kVisitsClean = "visits_clean.csv";
inline constexpr const char* kSensorsClean = "sensors_clean.csv";
inline constexpr const char* kAlignAudit = "align_audit.csv";
inline constexpr const char* kAlignedVisits = "aligned_visits.csv";
inline constexpr const char* kAlignedSensors = "aligned_sensors.csv";
inline constexpr const char* kAlignedMeta = "aligned_meta.csv";
inline constexpr const char* kFollowupProfile = "followup_profile.csv";
inline constexpr const char* kMergeDecisions = "merge_decisions.csv";
inline constexpr const char* kFeatures = "features.csv";
inline constexpr const char* kFeaturesAugmented = "features_augmented.csv";
inline constexpr const char* kRelevance = "relevance.csv";
inline constexpr const char* kBundleDir = "bundle";
inline constexpr const char* kMetrics = "metrics.csv";
inline constexpr const char* kPredictions = "predictions.csv";
inline constexpr const char* kImportance = "importance.csv";
}  // namespace artifact

// Pieces shared with tests.
std::vector<AlignedPatient> align_cohort(const Cohort& cohort,
                                         const SyncConfig& sync_cfg);
std::vector<ObservationWindow> clinical_windows(
    std::span<const AlignedPatient> aligned);

void write_audit_csv(const std::filesystem::path& path,
                     std::span<const AlignedPatient> aligned);
void write_merge_decisions_csv(const std::filesystem::path& path,
                               std::span<const MergeDecision> decisions);
std::vector<MergeDecision> read_merge_decisions_csv(
    const std::filesystem::path& path);
void write_metrics_csv(const std::filesystem::path& path, const EvalOutput& eval);
void write_predictions_csv(const std::filesystem::path& path,
                           std::span<const EvalPrediction> predictions);
void write_relevance_csv(const std::filesystem::path& path,
                         std::span<const RelevanceReport> reports);
void write_importance_csv(const std::filesystem::path& path,
                          const TrainedBundle& bundle);
void write_followup_csv(const std::filesystem::path& path,
                        std::span<const FollowupEntry> profile);

// Patient-level holdout split driven by the master seed ("holdout"
// substream); returns (train, holdout).
std::pair<std::vector<std::string>, std::vector<std::string>> holdout_split(
    std::vector<std::string> patient_ids, double frac, std::uint64_t seed);

}  // namespace alsprog
