#include "alsprog/sync.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "alsprog/error.hpp"

namespace alsprog {

namespace {

std::optional<int> first_sensor_day(std::span<const SensorSeries> series) {
  std::optional<int> first;
  for (const auto& s : series)
    if (!s.samples.empty() && (!first || s.samples.front().day < *first))
      first = s.samples.front().day;
  return first;
}

std::optional<int> last_sensor_day(std::span<const SensorSeries> series) {
  std::optional<int> last;
  for (const auto& s : series)
    if (!s.samples.empty() && (!last || s.samples.back().day > *last))
      last = s.samples.back().day;
  return last;
}

// last sensor sample day at-or-before t, across channels
std::optional<int> last_sensor_day_at_or_before(std::span<const SensorSeries> series,
                                                int t) {
  std::optional<int> best;
  for (const auto& s : series) {
    auto it = std::upper_bound(s.samples.begin(), s.samples.end(), t,
                               [](int v, const SensorSample& x) { return v < x.day; });
    if (it != s.samples.begin()) {
      const int d = std::prev(it)->day;
      if (!best || d > *best) best = d;
    }
  }
  return best;
}

}  // namespace

std::string to_string(DropReason r) {
  switch (r) {
    case DropReason::pre_sensor: return "pre_sensor";
    case DropReason::tail_gt_60d: return "tail_gt_60d";
    case DropReason::single_visit_patient: return "single_visit_patient";
  }
  return "?";
}

std::string to_string(ExclusionReason r) {
  switch (r) {
    case ExclusionReason::none: return "none";
    case ExclusionReason::no_clinician_visits: return "no_clinician_visits";
    case ExclusionReason::single_visit_patient: return "single_visit_patient";
  }
  return "?";
}

TimelineTrim trim_timeline(std::span<const int> event_days,
                           std::span<const SensorSeries> series,
                           int tail_max_gap_days) {
  TimelineTrim trim;
  trim.keep.assign(event_days.size(), true);
  if (event_days.empty()) return trim;

  const auto t1s = first_sensor_day(series);
  const auto t_last = last_sensor_day(series);

  // head rule: one step back from the sensor start
  if (t1s && *t1s > event_days.front()) {
    // latest event at-or-before the sensor start; everything strictly
    // before it carries no usable sensor window
    std::size_t anchor = 0;
    for (std::size_t i = 0; i < event_days.size(); ++i)
      if (event_days[i] <= *t1s) anchor = i;
    for (std::size_t i = 0; i < anchor; ++i) {
      trim.keep[i] = false;
      trim.dropped.push_back({event_days[i], DropReason::pre_sensor});
    }
  }

  // tail rule: at most one event may outlive the sensor record, and only
  // within the configured gap of the last preceding sample
  if (t_last) {
    auto last_kept = [&]() -> std::optional<std::size_t> {
      for (std::size_t i = event_days.size(); i > 0; --i)
        if (trim.keep[i - 1]) return i - 1;
      return std::nullopt;
    };
    auto prev_kept = [&](std::size_t idx) -> std::optional<std::size_t> {
      for (std::size_t i = idx; i > 0; --i)
        if (trim.keep[i - 1]) return i - 1;
      return std::nullopt;
    };
    while (true) {
      const auto li = last_kept();
      if (!li) break;
      const int t = event_days[*li];
      if (t <= *t_last) break;  // inside the sensor span
      const auto lt = last_sensor_day_at_or_before(series, t);
      const auto pi = prev_kept(*li);
      const bool prev_ok = !pi || (lt && event_days[*pi] <= *lt);
      if (lt && t - *lt <= tail_max_gap_days && prev_ok) break;
      trim.keep[*li] = false;
      trim.dropped.push_back({t, DropReason::tail_gt_60d});
    }
  }

  std::sort(trim.dropped.begin(), trim.dropped.end(),
            [](const DroppedVisit& a, const DroppedVisit& b) { return a.day < b.day; });
  return trim;
}

AlignedPatient align(const std::string& patient_id,
                     std::vector<VisitRecord> clinician_visits,
                     std::vector<SensorSeries> series,
                     const SyncConfig& config) {
  AlignedPatient out;
  out.patient_id = patient_id;

  std::erase_if(clinician_visits,
                [](const VisitRecord& v) { return v.source != Source::clinician; });
  std::sort(clinician_visits.begin(), clinician_visits.end(),
            [](const VisitRecord& a, const VisitRecord& b) { return a.day < b.day; });

  out.sensor_first_day = first_sensor_day(series);
  if (clinician_visits.empty()) {
    out.series = std::move(series);
    out.sensor_last_day = last_sensor_day(out.series);
    out.exclusion = ExclusionReason::no_clinician_visits;
    return out;
  }
  out.clinical_first_day = clinician_visits.front().day;

  std::vector<int> days;
  days.reserve(clinician_visits.size());
  for (const auto& v : clinician_visits) days.push_back(v.day);
  TimelineTrim trim = trim_timeline(days, series, config.tail_max_gap_days);
  out.dropped = std::move(trim.dropped);

  for (std::size_t i = 0; i < clinician_visits.size(); ++i)
    if (trim.keep[i]) out.visits.push_back(std::move(clinician_visits[i]));

  if (out.visits.size() < 2) out.exclusion = ExclusionReason::single_visit_patient;

  // truncate sensors past the last kept clinical day
  if (!out.visits.empty()) {
    const int last_clinical = out.visits.back().day;
    for (auto& s : series) {
      auto it = std::upper_bound(
          s.samples.begin(), s.samples.end(), last_clinical,
          [](int v, const SensorSample& x) { return v < x.day; });
      s.samples.erase(it, s.samples.end());
    }
  }
  out.series = std::move(series);
  out.sensor_last_day = last_sensor_day(out.series);
  return out;
}

std::vector<ObservationWindow> build_windows(const AlignedPatient& aligned) {
  std::vector<ObservationWindow> out;
  if (!aligned.usable() || aligned.visits.size() < 2) return out;
  for (std::size_t i = 1; i < aligned.visits.size(); ++i) {
    const VisitRecord& prev = aligned.visits[i - 1];
    const VisitRecord& next = aligned.visits[i];
    for (const QuestionId q : QuestionId::all()) {
      const auto& a = prev.score(q);
      const auto& b = next.score(q);
      if (!a.has_value() || !b.has_value()) continue;
      ObservationWindow w;
      w.patient_id = aligned.patient_id;
      w.question = q;
      w.window_start = prev.day;
      w.window_end = next.day;
      w.previous_value = *a;
      w.target_value = *b;
      w.delta_days = next.day - prev.day;
      w.days_since_diagnosis = prev.day;
      w.followup_index = static_cast<int>(i);
      out.push_back(w);
    }
  }
  return out;
}

std::vector<FollowupEntry> cohort_followup_profile(
    std::span<const AlignedPatient> patients) {
  std::size_t max_visits = 0;
  for (const auto& p : patients)
    if (p.usable()) max_visits = std::max(max_visits, p.visits.size());

  std::vector<FollowupEntry> out;
  for (std::size_t k = 0; k < max_visits; ++k) {
    FollowupEntry entry;
    entry.followup_index = static_cast<int>(k);
    std::array<std::vector<double>, QuestionId::kCount> values;
    for (const auto& p : patients) {
      if (!p.usable() || p.visits.size() <= k) continue;
      ++entry.n_patients;
      for (const QuestionId q : QuestionId::all()) {
        const auto& s = p.visits[k].score(q);
        if (s.has_value()) values[q.offset()].push_back(s->value());
      }
    }
    for (int qi = 0; qi < QuestionId::kCount; ++qi) {
      const auto& v = values[qi];
      if (v.empty()) continue;
      MeanCi m;
      m.n = v.size();
      double sum = 0;
      for (const double x : v) sum += x;
      m.mean = sum / static_cast<double>(v.size());
      if (v.size() >= 2) {
        double acc = 0;
        for (const double x : v) acc += (x - m.mean) * (x - m.mean);
        const double sd = std::sqrt(acc / static_cast<double>(v.size() - 1));
        m.ci_half_width = 1.96 * sd / std::sqrt(static_cast<double>(v.size()));
      }
      entry.per_question[qi] = m;
    }
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace alsprog
