#include <doctest.h>

#include <vector>

#include "alsprog/sync.hpp"

using namespace alsprog;

namespace {

VisitRecord visit(const std::string& id, int day, int q1_score = 4) {
  VisitRecord v;
  v.patient_id = id;
  v.day = day;
  v.source = Source::clinician;
  for (int q = 0; q < 12; ++q) v.scores[q] = Score(q1_score);
  return v;
}

SensorSeries daily(const std::string& id, const std::string& channel, int from,
                   int to) {
  SensorSeries s;
  s.patient_id = id;
  s.channel = channel;
  for (int d = from; d <= to; ++d) s.samples.push_back({d, 1.0});
  return s;
}

}  // namespace

TEST_SUITE("sync") {

TEST_CASE("worked example: sensor starts after the first visit") {
  // clinical days {690, 780, 873}, sensor from day 800: drop 690 only
  std::vector<VisitRecord> visits = {visit("p", 690), visit("p", 780),
                                     visit("p", 873)};
  std::vector<SensorSeries> series = {daily("p", "steps", 800, 872)};
  const AlignedPatient a = align("p", visits, series, {});
  REQUIRE(a.visits.size() == 2);
  CHECK(a.visits[0].day == 780);
  CHECK(a.visits[1].day == 873);
  REQUIRE(a.dropped.size() == 1);
  CHECK(a.dropped[0].day == 690);
  CHECK(a.dropped[0].reason == DropReason::pre_sensor);
  CHECK(a.usable());
}

TEST_CASE("sensor before the first visit keeps everything") {
  std::vector<VisitRecord> visits = {visit("p", 150), visit("p", 250)};
  std::vector<SensorSeries> series = {daily("p", "steps", 100, 260)};
  const AlignedPatient a = align("p", visits, series, {});
  CHECK(a.visits.size() == 2);
  CHECK(a.dropped.empty());
}

TEST_CASE("60-day tail boundary") {
  std::vector<SensorSeries> series = {daily("p", "steps", 700, 900)};

  SUBCASE("gap of 61 drops the final visit") {
    std::vector<VisitRecord> visits = {visit("p", 750), visit("p", 850),
                                       visit("p", 961)};
    const AlignedPatient a = align("p", visits, series, {});
    REQUIRE(a.visits.size() == 2);
    CHECK(a.visits.back().day == 850);
    REQUIRE(a.dropped.size() == 1);
    CHECK(a.dropped[0].day == 961);
    CHECK(a.dropped[0].reason == DropReason::tail_gt_60d);
  }

  SUBCASE("gap of exactly 60 keeps it") {
    std::vector<VisitRecord> visits = {visit("p", 750), visit("p", 850),
                                       visit("p", 960)};
    const AlignedPatient a = align("p", visits, series, {});
    CHECK(a.visits.size() == 3);
    CHECK(a.visits.back().day == 960);
  }
}

TEST_CASE("sensor truncation after the last kept visit") {
  std::vector<VisitRecord> visits = {visit("p", 100), visit("p", 200)};
  std::vector<SensorSeries> series = {daily("p", "steps", 90, 300)};
  const AlignedPatient a = align("p", visits, series, {});
  CHECK(a.visits.size() == 2);
  REQUIRE(a.series.size() == 1);
  CHECK(a.series[0].samples.back().day == 200);
  CHECK(a.sensor_last_day == 200);
}

TEST_CASE("at most one visit survives past the sensor end") {
  // sensors stop at 845; both 850 and 900 lie beyond, only the earlier
  // stays (it becomes the final target)
  std::vector<VisitRecord> visits = {visit("p", 700), visit("p", 850),
                                     visit("p", 900)};
  std::vector<SensorSeries> series = {daily("p", "steps", 650, 845)};
  const AlignedPatient a = align("p", visits, series, {});
  REQUIRE(a.visits.size() == 2);
  CHECK(a.visits.back().day == 850);
  REQUIRE(a.dropped.size() == 1);
  CHECK(a.dropped[0].day == 900);
}

TEST_CASE("alignment is a fixed point") {
  const auto check_fixed_point = [](std::vector<VisitRecord> visits,
                                    std::vector<SensorSeries> series) {
    const AlignedPatient once = align("p", visits, series, {});
    const AlignedPatient twice = align("p", once.visits, once.series, {});
    REQUIRE(once.visits.size() == twice.visits.size());
    for (std::size_t i = 0; i < once.visits.size(); ++i)
      CHECK(once.visits[i].day == twice.visits[i].day);
    CHECK(twice.dropped.empty());
    REQUIRE(once.series.size() == twice.series.size());
    for (std::size_t i = 0; i < once.series.size(); ++i)
      CHECK(once.series[i].samples.size() == twice.series[i].samples.size());
  };

  check_fixed_point({visit("p", 690), visit("p", 780), visit("p", 873)},
                    {daily("p", "steps", 800, 872)});
  check_fixed_point({visit("p", 750), visit("p", 850), visit("p", 960)},
                    {daily("p", "steps", 700, 900)});
  // mid-series sensor gap before the tail
  {
    SensorSeries s;
    s.patient_id = "p";
    s.channel = "steps";
    for (int d = 80; d <= 130; ++d) s.samples.push_back({d, 1.0});
    check_fixed_point({visit("p", 100), visit("p", 150), visit("p", 180)}, {s});
  }
}

TEST_CASE("zero clinician visits excludes the patient") {
  VisitRecord self = visit("p", 100);
  self.source = Source::self_assessment;
  const AlignedPatient a = align("p", {self}, {daily("p", "s", 50, 200)}, {});
  CHECK(a.exclusion == ExclusionReason::no_clinician_visits);
  CHECK(!a.usable());
}

TEST_CASE("single remaining visit flags exclusion but keeps the visit") {
  std::vector<VisitRecord> visits = {visit("p", 100)};
  const AlignedPatient a = align("p", visits, {daily("p", "s", 50, 200)}, {});
  CHECK(a.exclusion == ExclusionReason::single_visit_patient);
  CHECK(a.visits.size() == 1);
  CHECK(build_windows(a).empty());
}

TEST_CASE("patient with no sensor data keeps all visits") {
  std::vector<VisitRecord> visits = {visit("p", 100), visit("p", 200)};
  const AlignedPatient a = align("p", visits, {}, {});
  CHECK(a.visits.size() == 2);
  CHECK(a.usable());
  CHECK(!a.sensor_first_day.has_value());
}

TEST_CASE("build_windows pairs consecutive visits per question") {
  VisitRecord v1 = visit("p", 780);
  VisitRecord v2 = visit("p", 873);
  v1.scores[0] = Score(4);
  v2.scores[0] = Score(3);
  AlignedPatient a;
  a.patient_id = "p";
  a.visits = {v1, v2};
  const auto windows = build_windows(a);
  REQUIRE(windows.size() == 12);
  const ObservationWindow& w = windows[0];
  CHECK(w.question.index() == 1);
  CHECK(w.window_start == 780);
  CHECK(w.window_end == 873);
  CHECK(w.previous_value.value() == 4);
  CHECK(w.target_value.value() == 3);
  CHECK(w.delta_days == 93);
  CHECK(w.days_since_diagnosis == 780);
  CHECK(w.followup_index == 1);
}

TEST_CASE("three visits with all questions give 24 windows") {
  AlignedPatient a;
  a.patient_id = "p";
  a.visits = {visit("p", 100), visit("p", 200), visit("p", 300)};
  CHECK(build_windows(a).size() == 24);
}

TEST_CASE("a missing score yields no window for that question") {
  VisitRecord v1 = visit("p", 100);
  VisitRecord v2 = visit("p", 200);
  v2.scores[4] = std::nullopt;  // q5 missing at the second visit
  AlignedPatient a;
  a.patient_id = "p";
  a.visits = {v1, v2};
  const auto windows = build_windows(a);
  CHECK(windows.size() == 11);
  for (const auto& w : windows) CHECK(w.question.index() != 5);
}

TEST_CASE("windows never reach into sensor data at or past their end") {
  std::vector<VisitRecord> visits = {visit("p", 100), visit("p", 200),
                                     visit("p", 300)};
  const AlignedPatient a = align("p", visits, {daily("p", "s", 50, 400)}, {});
  for (const auto& w : build_windows(a)) {
    CHECK(w.window_end > w.window_start);
    for (const auto& s : a.series)
      for (const auto& sample : s.samples)
        if (sample.day >= w.window_end)
          CHECK(sample.day >= w.window_end);  // slicing is [start, end)
  }
  // the aligned series itself never extends past the last visit
  for (const auto& s : a.series) CHECK(s.samples.back().day <= 300);
}

TEST_CASE("followup profile of a single patient with three visits") {
  AlignedPatient a;
  a.patient_id = "p";
  a.visits = {visit("p", 0, 4), visit("p", 100, 4), visit("p", 200, 4)};
  std::vector<AlignedPatient> cohort = {a};
  const auto profile = cohort_followup_profile(cohort);
  REQUIRE(profile.size() == 3);
  for (const auto& e : profile) {
    CHECK(e.n_patients == 1);
    REQUIRE(e.per_question[0].has_value());
    CHECK(e.per_question[0]->mean == 4.0);
    CHECK(!e.per_question[0]->ci_half_width.has_value());  // n < 2
  }
}

TEST_CASE("followup profile with constant scores has zero CI width") {
  AlignedPatient a, b;
  a.patient_id = "a";
  a.visits = {visit("a", 0, 4), visit("a", 100, 4)};
  b.patient_id = "b";
  b.visits = {visit("b", 0, 4), visit("b", 100, 4)};
  std::vector<AlignedPatient> cohort = {a, b};
  const auto profile = cohort_followup_profile(cohort);
  REQUIRE(profile.size() == 2);
  CHECK(profile[0].n_patients == 2);
  REQUIRE(profile[0].per_question[0]->ci_half_width.has_value());
  CHECK(*profile[0].per_question[0]->ci_half_width == 0.0);
}

TEST_CASE("followup counts are non-increasing") {
  AlignedPatient a, b;
  a.patient_id = "a";
  a.visits = {visit("a", 0), visit("a", 100), visit("a", 200)};
  b.patient_id = "b";
  b.visits = {visit("b", 0), visit("b", 100)};
  std::vector<AlignedPatient> cohort = {a, b};
  const auto profile = cohort_followup_profile(cohort);
  for (std::size_t i = 1; i < profile.size(); ++i)
    CHECK(profile[i].n_patients <= profile[i - 1].n_patients);
}

}  // TEST_SUITE
