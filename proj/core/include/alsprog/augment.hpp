#pragma once

#include <span>
#include <string>
#include <vector>

#include "alsprog/core.hpp"
#include "alsprog/sync.hpp"

namespace alsprog {

enum class MergeReason { merged, rejected_distribution, untestable };

std::string to_string(MergeReason r);

struct MergeDecision {
  std::string patient_id;
  QuestionId question{1};
  double chi2_statistic = 0;
  int dof = 0;
  double p_value = 1;
  bool merged = false;
  MergeReason reason = MergeReason::untestable;
};

struct Chi2Result {
  double statistic = 0;
  int dof = 0;
  double p = 1;
};

// Pearson chi-squared homogeneity test on the 2xC contingency table over
// the score categories present in either sample. Both samples concentrated
// on one identical category gives dof = 0, statistic 0, p = 1.
Chi2Result chi2_same_distribution(std::span<const Score> clinician,
                                  std::span<const Score> self);

struct AugmentConfig {
  double alpha = 0.05;
  int horizon_min_days = 90;
  int tail_max_gap_days = 60;
};

// One decision per (patient, question): merge the self-assessment scores
// into the clinician timeline iff the test fails to reject identical
// distributions at alpha. Pairs with an empty side are untestable and
// never merged. Expected-count adequacy (E >= 5) is reported as a warning
// only.
std::vector<MergeDecision> decide_merges(std::span<const AlignedPatient> patients,
                                         std::span<const VisitRecord> self_visits,
                                         const AugmentConfig& cfg,
                                         std::vector<std::string>* warnings = nullptr);

// Unified timeline for the decision's question: the union of both sources
// sorted by day, clinician winning same-day conflicts. Only the decided
// question's scores are populated.
std::vector<VisitRecord> merge_pair(std::span<const VisitRecord> clinician_visits,
                                    std::span<const VisitRecord> self_visits,
                                    const MergeDecision& decision);

// Score timeline used for horizon windowing.
struct ScorePoint {
  int day = 0;
  Score value{0};
  Source source = Source::clinician;
};

// Windows under the minimum-horizon rule: each anchor targets the earliest
// later point at least horizon_min_days ahead.
std::vector<ObservationWindow> horizon_windows(const std::string& patient_id,
                                               QuestionId question,
                                               std::span<const ScorePoint> timeline,
                                               int horizon_min_days);

// Full augmented window set for the cohort: merged (or clinician-only)
// per-question timelines, trimmed against the sensor record with the same
// head/tail rules as the clinical alignment, then horizon-windowed.
// Patients excluded by sync for having a single clinician visit become
// usable here when merged self points give them two or more.
std::vector<ObservationWindow> augmented_windows(
    std::span<const AlignedPatient> patients,
    std::span<const VisitRecord> self_visits,
    std::span<const MergeDecision> decisions, const AugmentConfig& cfg);

}  // namespace alsprog
