#include "alsprog/augment.hpp"

#include <algorithm>
#include <array>
#include <map>

#include "alsprog/error.hpp"
#include "alsprog/stats.hpp"

namespace alsprog {

namespace {

std::vector<Score> scores_for_question(std::span<const VisitRecord> visits,
                                       QuestionId q) {
  std::vector<Score> out;
  for (const auto& v : visits) {
    const auto& s = v.score(q);
    if (s.has_value()) out.push_back(*s);
  }
  return out;
}

}  // namespace

std::string to_string(MergeReason r) {
  switch (r) {
    case MergeReason::merged: return "merged";
    case MergeReason::rejected_distribution: return "rejected_distribution";
    case MergeReason::untestable: return "untestable";
  }
  return "?";
}

Chi2Result chi2_same_distribution(std::span<const Score> clinician,
                                  std::span<const Score> self) {
  if (clinician.empty() || self.empty())
    throw DataError("chi2_same_distribution: empty sample");

  std::array<double, 5> row_c = {}, row_s = {};
  for (const Score& s : clinician) ++row_c[s.value()];
  for (const Score& s : self) ++row_s[s.value()];

  // categories present in the union; all-zero columns carry no information
  std::vector<int> cats;
  for (int c = 0; c <= 4; ++c)
    if (row_c[c] + row_s[c] > 0) cats.push_back(c);

  Chi2Result r;
  r.dof = static_cast<int>(cats.size()) - 1;
  if (r.dof == 0) {
    r.statistic = 0;
    r.p = 1;
    return r;
  }

  const double n_c = static_cast<double>(clinician.size());
  const double n_s = static_cast<double>(self.size());
  const double total = n_c + n_s;
  double stat = 0;
  for (const int c : cats) {
    const double col = row_c[c] + row_s[c];
    const double e_c = n_c * col / total;
    const double e_s = n_s * col / total;
    stat += (row_c[c] - e_c) * (row_c[c] - e_c) / e_c;
    stat += (row_s[c] - e_s) * (row_s[c] - e_s) / e_s;
  }
  r.statistic = stat;
  r.p = stats::chi2_upper_p(stat, r.dof);
  return r;
}

std::vector<MergeDecision> decide_merges(std::span<const AlignedPatient> patients,
                                         std::span<const VisitRecord> self_visits,
                                         const AugmentConfig& cfg,
                                         std::vector<std::string>* warnings) {
  std::map<std::string, std::vector<VisitRecord>> self_by_patient;
  for (const auto& v : self_visits)
    if (v.source == Source::self_assessment)
      self_by_patient[v.patient_id].push_back(v);

  std::vector<MergeDecision> decisions;
  for (const auto& p : patients) {
    const auto sit = self_by_patient.find(p.patient_id);
    const std::span<const VisitRecord> self =
        sit == self_by_patient.end() ? std::span<const VisitRecord>{}
                                     : std::span<const VisitRecord>(sit->second);
    for (const QuestionId q : QuestionId::all()) {
      MergeDecision d;
      d.patient_id = p.patient_id;
      d.question = q;
      const auto cs = scores_for_question(p.visits, q);
      const auto ss = scores_for_question(self, q);
      if (cs.empty() || ss.empty()) {
        d.reason = MergeReason::untestable;
        d.merged = false;
        decisions.push_back(d);
        continue;
      }
      const Chi2Result r = chi2_same_distribution(cs, ss);
      d.chi2_statistic = r.statistic;
      d.dof = r.dof;
      d.p_value = r.p;
      d.merged = r.p >= cfg.alpha;
      d.reason = d.merged ? MergeReason::merged : MergeReason::rejected_distribution;
      decisions.push_back(d);

      if (warnings && r.dof > 0) {
        const double total = static_cast<double>(cs.size() + ss.size());
        const double min_row = std::min(cs.size(), ss.size());
        // smallest expected count: min row total x smallest column share
        std::array<double, 5> col = {};
        for (const Score& s : cs) ++col[s.value()];
        for (const Score& s : ss) ++col[s.value()];
        double min_e = total;
        for (const double c : col)
          if (c > 0) min_e = std::min(min_e, min_row * c / total);
        if (min_e < 5.0)
          warnings->push_back("chi2 expected count " + std::to_string(min_e) +
                              " < 5 for " + p.patient_id + " q" +
                              std::to_string(q.index()));
      }
    }
  }
  return decisions;
}

std::vector<VisitRecord> merge_pair(std::span<const VisitRecord> clinician_visits,
                                    std::span<const VisitRecord> self_visits,
                                    const MergeDecision& decision) {
  if (!decision.merged)
    throw DataError("merge_pair called with a non-merged decision");
  const QuestionId q = decision.question;

  std::map<int, VisitRecord> by_day;
  auto add = [&](const VisitRecord& v) {
    const auto& s = v.score(q);
    if (!s.has_value()) return;
    auto it = by_day.find(v.day);
    if (it == by_day.end()) {
      VisitRecord r;
      r.patient_id = decision.patient_id;
      r.day = v.day;
      r.source = v.source;
      r.score(q) = s;
      by_day.emplace(v.day, std::move(r));
    } else if (v.source == Source::clinician) {
      // same-day conflict: the clinician value wins
      it->second.source = Source::clinician;
      it->second.score(q) = s;
    }
  };
  // clinician entries first so self entries on the same day never displace
  // them
  for (const auto& v : clinician_visits)
    if (v.source == Source::clinician) add(v);
  for (const auto& v : self_visits)
    if (v.source == Source::self_assessment) add(v);

  std::vector<VisitRecord> out;
  out.reserve(by_day.size());
  for (auto& [day, v] : by_day) out.push_back(std::move(v));
  return out;
}

std::vector<ObservationWindow> horizon_windows(const std::string& patient_id,
                                               QuestionId question,
                                               std::span<const ScorePoint> timeline,
                                               int horizon_min_days) {
  std::vector<ObservationWindow> out;
  for (std::size_t i = 0; i < timeline.size(); ++i) {
    for (std::size_t j = i + 1; j < timeline.size(); ++j) {
      if (timeline[j].day - timeline[i].day < horizon_min_days) continue;
      ObservationWindow w;
      w.patient_id = patient_id;
      w.question = question;
      w.window_start = timeline[i].day;
      w.window_end = timeline[j].day;
      w.previous_value = timeline[i].value;
      w.target_value = timeline[j].value;
      w.delta_days = w.window_end - w.window_start;
      w.days_since_diagnosis = w.window_start;
      w.followup_index = static_cast<int>(j);
      out.push_back(w);
      break;  // earliest qualifying target only
    }
  }
  return out;
}

std::vector<ObservationWindow> augmented_windows(
    std::span<const AlignedPatient> patients,
    std::span<const VisitRecord> self_visits,
    std::span<const MergeDecision> decisions, const AugmentConfig& cfg) {
  std::map<std::pair<std::string, int>, const MergeDecision*> decision_index;
  for (const auto& d : decisions)
    decision_index[{d.patient_id, d.question.index()}] = &d;

  std::map<std::string, std::vector<VisitRecord>> self_by_patient;
  for (const auto& v : self_visits)
    if (v.source == Source::self_assessment)
      self_by_patient[v.patient_id].push_back(v);

  std::vector<ObservationWindow> out;
  for (const auto& p : patients) {
    if (p.exclusion == ExclusionReason::no_clinician_visits) continue;
    const auto sit = self_by_patient.find(p.patient_id);
    const std::span<const VisitRecord> self =
        sit == self_by_patient.end() ? std::span<const VisitRecord>{}
                                     : std::span<const VisitRecord>(sit->second);

    for (const QuestionId q : QuestionId::all()) {
      // per-question timeline: merged when the decision allows, otherwise
      // the kept clinician visits alone
      std::vector<ScorePoint> timeline;
      const auto dit = decision_index.find({p.patient_id, q.index()});
      if (dit != decision_index.end() && dit->second->merged) {
        for (const auto& v : merge_pair(p.visits, self, *dit->second)) {
          const auto& s = v.score(q);
          if (s.has_value()) timeline.push_back({v.day, *s, v.source});
        }
      } else {
        for (const auto& v : p.visits) {
          const auto& s = v.score(q);
          if (s.has_value()) timeline.push_back({v.day, *s, v.source});
        }
      }
      if (timeline.size() < 2) continue;

      // merged self points may fall outside the clinician-aligned span, so
      // the timeline gets the same head/tail trimming against the sensors
      std::vector<int> days;
      days.reserve(timeline.size());
      for (const auto& pt : timeline) days.push_back(pt.day);
      const TimelineTrim trim = trim_timeline(days, p.series, cfg.tail_max_gap_days);
      std::vector<ScorePoint> kept;
      for (std::size_t i = 0; i < timeline.size(); ++i)
        if (trim.keep[i]) kept.push_back(timeline[i]);
      if (kept.size() < 2) continue;

      const auto windows = horizon_windows(p.patient_id, q, kept, cfg.horizon_min_days);
      out.insert(out.end(), windows.begin(), windows.end());
    }
  }
  return out;
}

}  // namespace alsprog
