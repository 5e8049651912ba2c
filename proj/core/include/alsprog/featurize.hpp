#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alsprog/core.hpp"
#include "alsprog/ingest.hpp"
#include "alsprog/sync.hpp"

namespace alsprog {

enum class FeatureMode { median, catalog };

std::string to_string(FeatureMode m);
FeatureMode feature_mode_from_string(const std::string& s);

// The fixed extractor catalog, applied per channel per window. Feature
// column names are "<channel>__<extractor>".
const std::vector<std::string>& extractor_catalog();

// Individual extractors. NaN signals "not computable for this slice".
double ext_count(std::span<const SensorSample> s);
double ext_mean(std::span<const SensorSample> s);
double ext_median(std::span<const SensorSample> s);
double ext_std(std::span<const SensorSample> s);  // population form
double ext_min(std::span<const SensorSample> s);
double ext_max(std::span<const SensorSample> s);
double ext_range(std::span<const SensorSample> s);
double ext_quantile(std::span<const SensorSample> s, double q);
double ext_rmssd(std::span<const SensorSample> s);
double ext_linear_slope(std::span<const SensorSample> s);  // value vs day
double ext_benford_correlation(std::span<const SensorSample> s);

// All features of one channel slice in catalog order (or just the median
// in median mode), appended as (column, value) pairs.
void extract_channel_features(std::string_view channel,
                              std::span<const SensorSample> slice,
                              FeatureMode mode,
                              std::vector<std::pair<std::string, double>>& out);

enum class ColumnKind { engineered, static_field, sensor };

struct RowKey {
  std::string patient_id;
  int question = 0;  // 1..12
  int window_start = 0;
  int window_end = 0;
};

// Window-by-feature matrix in the training-table layout: engineered
// columns first (days_since_diagnosis, previous_value, delta_days,
// followup_index), then static, then sensor features; the target score is
// kept separately. NaN marks a missing value.
struct FeatureMatrix {
  std::vector<std::string> columns;
  std::vector<ColumnKind> kinds;
  std::vector<RowKey> keys;
  std::vector<std::vector<double>> rows;
  std::vector<int> targets;

  std::size_t n_rows() const { return rows.size(); }
  std::size_t column_index(std::string_view name) const;  // throws if absent
};

// Assembles the matrix for a set of windows. Sensor slices come from each
// window's patient in `patients`; the channel universe is the union over
// the cohort so all rows share one column set.
FeatureMatrix build_feature_matrix(std::span<const AlignedPatient> patients,
                                   std::span<const ObservationWindow> windows,
                                   std::span<const StaticRecord> statics,
                                   const StaticEncoder& encoder,
                                   FeatureMode mode, int threads = 1);

FeatureMatrix subset_rows(const FeatureMatrix& m, std::span<const std::size_t> idx);
std::vector<std::size_t> rows_for_question(const FeatureMatrix& m, QuestionId q);
std::vector<std::size_t> rows_for_patients(const FeatureMatrix& m,
                                           std::span<const std::string> patients);

struct PruneConfig {
  double max_missing_frac = 0.3;
  double min_variance = 1e-12;
};

struct PruneLogEntry {
  std::string column;
  std::string reason;  // "missing_frac" | "low_variance"
  double value = 0;
};

// Column filter + imputation parameters learned on training rows only, so
// fold evaluation cannot leak validation statistics.
struct ColumnTransform {
  std::vector<std::string> columns;
  std::vector<ColumnKind> kinds;
  std::vector<double> impute_medians;
  std::vector<PruneLogEntry> dropped;
};

ColumnTransform fit_prune(const FeatureMatrix& m, const PruneConfig& cfg);

// Projects a matrix onto the transform's columns and fills missing cells
// with the stored medians. A required column absent from `m` is an error.
FeatureMatrix apply_transform(const FeatureMatrix& m, const ColumnTransform& t);

struct SpearmanResult {
  bool testable = false;
  std::string reason;  // set when not testable
  double rho = 0;
  double p = 1;
  std::size_t n = 0;
};

// Spearman rank correlation with average ranks for ties and a two-sided
// t-approximation p-value; requires n >= 5 paired observations and
// variance on both sides.
SpearmanResult spearman_test(std::span<const double> x, std::span<const double> y);

// Benjamini-Yekutieli adjustment: with m tests and c(m) = sum_{j<=m} 1/j,
// sorted p_(i) receive min_{j>=i}(m*c(m)*p_(j)/j), capped at 1. Returns
// adjusted values in input order.
std::vector<double> benjamini_yekutieli(std::span<const double> p_values);

enum class SelectionMode { keep_all, top_k };

std::string to_string(SelectionMode m);
SelectionMode selection_mode_from_string(const std::string& s);

struct SelectionConfig {
  SelectionMode mode = SelectionMode::keep_all;
  double fdr_level = 0.05;
  int top_k = 10;
};

struct RelevanceRow {
  std::string feature;
  bool testable = false;
  std::string reason;
  double rho = 0;
  double p = 1;
  double p_adj = 1;
  bool selected = false;
  std::size_t n = 0;
};

struct RelevanceReport {
  int question = 0;
  std::vector<RelevanceRow> rows;

  std::vector<std::string> selected_features() const;
};

struct RelevanceInput {
  std::string feature;
  bool testable = false;
  std::string reason;
  double rho = 0;
  double p = 1;
  std::size_t n = 0;
};

RelevanceReport fdr_select(int question, std::vector<RelevanceInput> tested,
                           const SelectionConfig& cfg);

// Runs the Spearman screen over the sensor columns of a (pruned, imputed,
// single-question) matrix against its targets.
RelevanceReport relevance_for_question(const FeatureMatrix& m, QuestionId q,
                                       const SelectionConfig& cfg);

void write_features_csv(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_features_csv(const std::filesystem::path& path,
                                bool require_targets = true);

}  // namespace alsprog
