#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace alsprog {

// ALSFRS-R question, Q1..Q12.
class QuestionId {
 public:
  static constexpr int kCount = 12;

  explicit QuestionId(int index);

  int index() const { return index_; }     // 1-based
  int offset() const { return index_ - 1; }  // 0-based array position

  static std::array<QuestionId, kCount> all();

  auto operator<=>(const QuestionId&) const = default;

 private:
  int index_;
};

// One ALSFRS-R sub-score, an ordinal in {0..4}.
class Score {
 public:
  explicit Score(int value);

  int value() const { return value_; }

  auto operator<=>(const Score&) const = default;

 private:
  int value_;
};

enum class Source { clinician, self_assessment };

std::string to_string(Source s);
Source source_from_string(const std::string& s);

// One questionnaire observation.
struct VisitRecord {
  std::string patient_id;
  int day = 0;  // days since diagnosis
  Source source = Source::clinician;
  std::array<std::optional<Score>, QuestionId::kCount> scores;

  const std::optional<Score>& score(QuestionId q) const { return scores[q.offset()]; }
  std::optional<Score>& score(QuestionId q) { return scores[q.offset()]; }
  bool has_any_score() const;
};

struct MetricReport {
  double rmse = 0;
  double mae = 0;
  std::size_t n = 0;
};

struct PredictionPair {
  Score truth;
  double predicted;
  PredictionPair(Score t, double p) : truth(t), predicted(p) {}
};

// RMSE / MAE over (truth, prediction) pairs. Pass raw model outputs for
// un-rounded metrics or postprocess()ed values for the leaderboard-style
// rounded mode. Empty input is an error, never a silent zero.
MetricReport compute_metrics(std::span<const PredictionPair> pairs);

// Nearest integer (ties away from zero) clipped to [0, 4]. This is the one
// place rounding happens; every emitted prediction goes through it.
Score postprocess(double prediction);

}  // namespace alsprog
