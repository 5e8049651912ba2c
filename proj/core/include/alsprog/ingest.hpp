#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alsprog/core.hpp"

namespace alsprog {

// Per-patient constant covariates. Field typing is inferred per column:
// a column whose every non-empty cell parses as a number is numeric,
// anything else is categorical.
struct StaticRecord {
  std::string patient_id;
  std::map<std::string, std::optional<double>> numeric_fields;
  std::map<std::string, std::optional<std::string>> categorical_fields;
};

struct SensorSample {
  int day = 0;
  double value = 0;
};

// One named daily channel per patient; days strictly increasing, gaps
// permitted.
struct SensorSeries {
  std::string patient_id;
  std::string channel;
  std::vector<SensorSample> samples;
};

struct Cohort {
  std::vector<StaticRecord> statics;
  std::vector<VisitRecord> visits;
  std::vector<SensorSeries> series;
  std::vector<std::string> warnings;  // non-fatal, e.g. duplicate sensor days
};

// Parses the three input tables. All rows are validated; any schema or
// value violation is collected with its file/row location and raised as a
// single DataError. Sensor samples come back sorted by day with same-day
// duplicates collapsed (last occurrence wins, logged as a warning).
Cohort load_cohort(const std::filesystem::path& static_path,
                   const std::filesystem::path& visits_path,
                   const std::filesystem::path& sensors_path);

// Replaces each missing numeric value by the median over the other
// patients' values for that field, and each missing categorical value by
// the modal label (ties broken lexicographically). A field missing for
// every patient is an error.
std::vector<StaticRecord> impute_static(std::vector<StaticRecord> records);

// Deterministic static-feature encoding: numeric fields pass through,
// categorical fields one-hot over the cohort's sorted label set. Column
// names and order are identical for every record.
class StaticEncoder {
 public:
  static StaticEncoder fit(std::span<const StaticRecord> records);

  const std::vector<std::string>& columns() const { return columns_; }

  // Values aligned with columns(); requires an imputed record.
  std::vector<double> encode(const StaticRecord& record) const;

 private:
  std::vector<std::string> numeric_names_;
  std::vector<std::pair<std::string, std::vector<std::string>>> categorical_;
  std::vector<std::string> columns_;
};

// Serialization used by the stage CLI so that re-running a stage from its
// persisted artifacts is bit-identical to the in-memory pipeline.
void write_static_csv(const std::filesystem::path& path,
                      std::span<const StaticRecord> records);
void write_visits_csv(const std::filesystem::path& path,
                      std::span<const VisitRecord> visits);
void write_sensors_csv(const std::filesystem::path& path,
                       std::span<const SensorSeries> series);

}  // namespace alsprog
