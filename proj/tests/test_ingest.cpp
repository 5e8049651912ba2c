#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "alsprog/csv.hpp"
#include "alsprog/error.hpp"
#include "alsprog/ingest.hpp"

using namespace alsprog;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("alsprog_ingest_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int counter;
};
int TempDir::counter = 0;

void write(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

struct Fixture {
  TempDir dir;
  fs::path statics, visits, sensors;

  explicit Fixture(const std::string& static_body =
                       "patient_id,age_at_diagnosis,sex\n"
                       "p1,61.5,F\n"
                       "p2,58,M\n",
                   const std::string& visits_body =
                       "patient_id,day,source,q1,q2,q3,q4,q5,q6,q7,q8,q9,q10,q11,q12\n"
                       "p1,100,clinician,4,4,4,4,4,4,4,4,4,4,4,4\n"
                       "p1,200,clinician,3,4,4,4,4,4,4,4,4,4,4,4\n"
                       "p2,150,clinician,4,,4,4,4,4,4,4,4,4,4,4\n"
                       "p2,260,self,3,3,3,3,3,3,3,3,3,3,3,3\n",
                   const std::string& sensors_body =
                       "patient_id,day,channel,value\n"
                       "p1,90,steps,1000\n"
                       "p1,91,steps,1200\n"
                       "p2,140,steps,900\n") {
    statics = dir.path / "static.csv";
    visits = dir.path / "visits.csv";
    sensors = dir.path / "sensors.csv";
    write(statics, static_body);
    write(visits, visits_body);
    write(sensors, sensors_body);
  }
};

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("round-trips a valid fixture") {
  Fixture f;
  const Cohort c = load_cohort(f.statics, f.visits, f.sensors);
  CHECK(c.statics.size() == 2);
  CHECK(c.visits.size() == 4);
  CHECK(c.series.size() == 2);
  CHECK(c.warnings.empty());
  CHECK(c.statics[0].numeric_fields.at("age_at_diagnosis") == 61.5);
  CHECK(c.statics[0].categorical_fields.at("sex") == "F");
  CHECK(!c.visits[2].score(QuestionId(2)).has_value());
}

TEST_CASE("score outside range names the row") {
  Fixture f("patient_id,age\np1,60\n",
            "patient_id,day,source,q1,q2,q3,q4,q5,q6,q7,q8,q9,q10,q11,q12\n"
            "p1,100,clinician,5,4,4,4,4,4,4,4,4,4,4,4\n",
            "patient_id,day,channel,value\np1,90,steps,1\n");
  try {
    load_cohort(f.statics, f.visits, f.sensors);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("visits.csv:2") != std::string::npos);
    CHECK(msg.find("{0..4}") != std::string::npos);
  }
}

TEST_CASE("sensor rows out of day order load sorted") {
  Fixture f("patient_id,age\np1,60\n",
            "patient_id,day,source,q1,q2,q3,q4,q5,q6,q7,q8,q9,q10,q11,q12\n"
            "p1,100,clinician,4,4,4,4,4,4,4,4,4,4,4,4\n"
            "p1,200,clinician,4,4,4,4,4,4,4,4,4,4,4,4\n",
            "patient_id,day,channel,value\n"
            "p1,95,steps,3\n"
            "p1,90,steps,1\n"
            "p1,92,steps,2\n");
  const Cohort c = load_cohort(f.statics, f.visits, f.sensors);
  REQUIRE(c.series.size() == 1);
  REQUIRE(c.series[0].samples.size() == 3);
  CHECK(c.series[0].samples[0].day == 90);
  CHECK(c.series[0].samples[1].day == 92);
  CHECK(c.series[0].samples[2].day == 95);
}

TEST_CASE("duplicate sensor day keeps the last occurrence and logs") {
  Fixture f("patient_id,age\np1,60\n",
            "patient_id,day,source,q1,q2,q3,q4,q5,q6,q7,q8,q9,q10,q11,q12\n"
            "p1,100,clinician,4,4,4,4,4,4,4,4,4,4,4,4\n"
            "p1,200,clinician,4,4,4,4,4,4,4,4,4,4,4,4\n",
            "patient_id,day,channel,value\n"
            "p1,90,steps,1\n"
            "p1,90,steps,7\n");
  const Cohort c = load_cohort(f.statics, f.visits, f.sensors);
  REQUIRE(c.series[0].samples.size() == 1);
  CHECK(c.series[0].samples[0].value == 7.0);
  CHECK(c.warnings.size() == 1);
}

TEST_CASE("duplicate visit key is rejected") {
  Fixture f("patient_id,age\np1,60\n",
            "patient_id,day,source,q1,q2,q3,q4,q5,q6,q7,q8,q9,q10,q11,q12\n"
            "p1,100,clinician,4,4,4,4,4,4,4,4,4,4,4,4\n"
            "p1,100,clinician,3,4,4,4,4,4,4,4,4,4,4,4\n",
            "patient_id,day,channel,value\np1,90,steps,1\n");
  CHECK_THROWS_AS(load_cohort(f.statics, f.visits, f.sensors), DataError);
}

TEST_CASE("unknown visit column is rejected") {
  Fixture f("patient_id,age\np1,60\n",
            "patient_id,day,source,q1,q2,q3,q4,q5,q6,q7,q8,q9,q10,q11,q12,bogus\n"
            "p1,100,clinician,4,4,4,4,4,4,4,4,4,4,4,4,9\n",
            "patient_id,day,channel,value\np1,90,steps,1\n");
  try {
    load_cohort(f.statics, f.visits, f.sensors);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
}

TEST_CASE("impute_static fills numeric medians") {
  std::vector<StaticRecord> records(4);
  const double values[] = {1, 2, 0, 4};
  for (int i = 0; i < 4; ++i) {
    records[i].patient_id = "p" + std::to_string(i);
    records[i].numeric_fields["f"] =
        i == 2 ? std::optional<double>{} : std::optional<double>{values[i]};
  }
  const auto out = impute_static(records);
  CHECK(out[2].numeric_fields.at("f") == 2.0);  // median of {1,2,4}
  for (int i : {0, 1, 3})
    CHECK(out[i].numeric_fields.at("f") == values[i]);
}

TEST_CASE("impute_static with no missing is the identity") {
  std::vector<StaticRecord> records(2);
  records[0].patient_id = "a";
  records[0].numeric_fields["f"] = 3.0;
  records[1].patient_id = "b";
  records[1].numeric_fields["f"] = 5.0;
  const auto out = impute_static(records);
  CHECK(out[0].numeric_fields.at("f") == 3.0);
  CHECK(out[1].numeric_fields.at("f") == 5.0);
}

TEST_CASE("impute_static of two missing uses the remaining median") {
  std::vector<StaticRecord> records(4);
  for (int i = 0; i < 4; ++i) records[i].patient_id = "p" + std::to_string(i);
  records[0].numeric_fields["f"] = 10.0;
  records[1].numeric_fields["f"] = std::nullopt;
  records[2].numeric_fields["f"] = 20.0;
  records[3].numeric_fields["f"] = std::nullopt;
  const auto out = impute_static(records);
  CHECK(out[1].numeric_fields.at("f") == 15.0);
  CHECK(out[3].numeric_fields.at("f") == 15.0);
}

TEST_CASE("impute_static categorical mode with lexicographic ties") {
  std::vector<StaticRecord> records(3);
  for (int i = 0; i < 3; ++i) records[i].patient_id = "p" + std::to_string(i);
  records[0].categorical_fields["site"] = "limb";
  records[1].categorical_fields["site"] = "bulbar";
  records[2].categorical_fields["site"] = std::nullopt;
  const auto out = impute_static(records);
  CHECK(out[2].categorical_fields.at("site") == "bulbar");
}

TEST_CASE("field missing everywhere is an error") {
  std::vector<StaticRecord> records(2);
  records[0].patient_id = "a";
  records[0].numeric_fields["f"] = std::nullopt;
  records[1].patient_id = "b";
  records[1].numeric_fields["f"] = std::nullopt;
  CHECK_THROWS_AS(impute_static(records), DataError);
}

TEST_CASE("static encoding is one-hot with deterministic columns") {
  std::vector<StaticRecord> records(2);
  records[0].patient_id = "a";
  records[0].numeric_fields["age_at_diagnosis"] = 61.0;
  records[0].categorical_fields["sex"] = "F";
  records[1].patient_id = "b";
  records[1].numeric_fields["age_at_diagnosis"] = 55.0;
  records[1].categorical_fields["sex"] = "M";

  const StaticEncoder enc = StaticEncoder::fit(records);
  CHECK(enc.columns() ==
        std::vector<std::string>{"age_at_diagnosis", "sex=F", "sex=M"});
  CHECK(enc.encode(records[0]) == std::vector<double>{61.0, 1.0, 0.0});
  CHECK(enc.encode(records[1]) == std::vector<double>{55.0, 0.0, 1.0});
}

TEST_CASE("loading is deterministic") {
  Fixture f;
  const Cohort a = load_cohort(f.statics, f.visits, f.sensors);
  const Cohort b = load_cohort(f.statics, f.visits, f.sensors);
  CHECK(a.statics.size() == b.statics.size());
  CHECK(a.visits.size() == b.visits.size());
  REQUIRE(a.series.size() == b.series.size());
  for (std::size_t i = 0; i < a.series.size(); ++i) {
    CHECK(a.series[i].patient_id == b.series[i].patient_id);
    CHECK(a.series[i].channel == b.series[i].channel);
    CHECK(a.series[i].samples.size() == b.series[i].samples.size());
  }
}

}  // TEST_SUITE
