#include "alsprog/core.hpp"

#include <cmath>

#include "alsprog/error.hpp"

namespace alsprog {

QuestionId::QuestionId(int index) : index_(index) {
  if (index < 1 || index > kCount)
    throw DataError("question index out of range: " + std::to_string(index));
}

std::array<QuestionId, QuestionId::kCount> QuestionId::all() {
  std::array<QuestionId, kCount> out = {
      QuestionId(1), QuestionId(2),  QuestionId(3),  QuestionId(4),
      QuestionId(5), QuestionId(6),  QuestionId(7),  QuestionId(8),
      QuestionId(9), QuestionId(10), QuestionId(11), QuestionId(12)};
  return out;
}

Score::Score(int value) : value_(value) {
  if (value < 0 || value > 4)
    throw DataError("score out of range [0,4]: " + std::to_string(value));
}

std::string to_string(Source s) {
  return s == Source::clinician ? "clinician" : "self";
}

Source source_from_string(const std::string& s) {
  if (s == "clinician") return Source::clinician;
  if (s == "self") return Source::self_assessment;
  throw DataError("unknown source '" + s + "', expected clinician|self");
}

bool VisitRecord::has_any_score() const {
  for (const auto& s : scores)
    if (s.has_value()) return true;
  return false;
}

MetricReport compute_metrics(std::span<const PredictionPair> pairs) {
  if (pairs.empty())
    throw DataError("compute_metrics: empty prediction set");
  double sq = 0, abs = 0;
  for (const auto& p : pairs) {
    const double e = static_cast<double>(p.truth.value()) - p.predicted;
    sq += e * e;
    abs += std::fabs(e);
  }
  const double n = static_cast<double>(pairs.size());
  return MetricReport{std::sqrt(sq / n), abs / n, pairs.size()};
}

Score postprocess(double prediction) {
  if (!std::isfinite(prediction))
    throw NumericError("postprocess: non-finite prediction");
  // std::round ties away from zero
  double r = std::round(prediction);
  if (r < 0) r = 0;
  if (r > 4) r = 4;
  return Score(static_cast<int>(r));
}

}  // namespace alsprog
