#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alsprog/core.hpp"
#include "alsprog/ingest.hpp"

namespace alsprog {

enum class DropReason { pre_sensor, tail_gt_60d, single_visit_patient };
enum class ExclusionReason { none, no_clinician_visits, single_visit_patient };

std::string to_string(DropReason r);
std::string to_string(ExclusionReason r);

struct DroppedVisit {
  int day = 0;
  DropReason reason = DropReason::pre_sensor;
};

// One patient's clinical timeline after synchronization against the sensor
// record. Kept visits are clinician-source and day-ascending; sensor series
// are truncated to the last kept clinical day.
struct AlignedPatient {
  std::string patient_id;
  std::vector<VisitRecord> visits;
  std::vector<SensorSeries> series;
  std::optional<int> sensor_first_day;
  std::optional<int> sensor_last_day;  // after truncation
  std::optional<int> clinical_first_day;
  std::vector<DroppedVisit> dropped;
  ExclusionReason exclusion = ExclusionReason::none;

  bool usable() const { return exclusion == ExclusionReason::none; }
};

struct SyncConfig {
  int tail_max_gap_days = 60;
};

// Timeline trimming shared between the clinical alignment and the merged
// self-assessment timelines in augment. Given ascending event days and the
// patient's sensor day set, returns a keep/drop decision per event:
//   head: if the sensor record starts after the first event, events
//         strictly before the latest event at-or-before the sensor start
//         are dropped (the one-step-back rule);
//   tail: events past the end of the sensor record are dropped from the
//         back until at most one remains and it is within max_gap days of
//         the last preceding sensor sample.
struct TimelineTrim {
  std::vector<bool> keep;
  std::vector<DroppedVisit> dropped;
};
TimelineTrim trim_timeline(std::span<const int> event_days,
                           std::span<const SensorSeries> series,
                           int tail_max_gap_days);

// Applies the synchronization rules to one patient. Visits must be sorted
// by day; only clinician-source visits participate. Patients left with
// fewer than two visits are flagged for exclusion, not erased, so that
// augmentation can still consider them.
AlignedPatient align(const std::string& patient_id,
                     std::vector<VisitRecord> clinician_visits,
                     std::vector<SensorSeries> series,
                     const SyncConfig& config = {});

// One training example: the half-open day interval between two consecutive
// kept visits for one question.
struct ObservationWindow {
  std::string patient_id;
  QuestionId question{1};
  int window_start = 0;  // inclusive
  int window_end = 0;    // exclusive
  Score previous_value{0};
  Score target_value{0};
  int delta_days = 0;           // end - start (true clinical gap)
  int days_since_diagnosis = 0;  // = window_start
  int followup_index = 0;        // ordinal of the target visit, 1-based
};

// One window per consecutive kept-visit pair per question with both scores
// present.
std::vector<ObservationWindow> build_windows(const AlignedPatient& aligned);

struct MeanCi {
  double mean = 0;
  std::size_t n = 0;
  std::optional<double> ci_half_width;  // 1.96 * sd / sqrt(n); n >= 2 only
};

struct FollowupEntry {
  int followup_index = 0;  // 0 = first kept visit
  std::size_t n_patients = 0;
  std::array<std::optional<MeanCi>, QuestionId::kCount> per_question;
};

// Per-visit-ordinal patient counts and mean scores with a 95% CI, the
// cohort profile behind the follow-up curves.
std::vector<FollowupEntry> cohort_followup_profile(
    std::span<const AlignedPatient> patients);

}  // namespace alsprog
