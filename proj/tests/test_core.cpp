#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "alsprog/core.hpp"
#include "alsprog/error.hpp"
#include "alsprog/rng.hpp"

using namespace alsprog;

TEST_SUITE("core") {

TEST_CASE("compute_metrics identity") {
  std::vector<PredictionPair> pairs = {{Score(1), 1.0}, {Score(2), 2.0}};
  const MetricReport r = compute_metrics(pairs);
  CHECK(r.rmse == 0.0);
  CHECK(r.mae == 0.0);
  CHECK(r.n == 2);
}

TEST_CASE("compute_metrics constant error magnitude") {
  std::vector<PredictionPair> pairs = {{Score(0), 4.0}, {Score(4), 0.0}};
  const MetricReport r = compute_metrics(pairs);
  CHECK(r.rmse == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(r.mae == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("compute_metrics hand computation") {
  // errors {1, 0, 1}: rmse = sqrt(2/3), mae = 2/3
  std::vector<PredictionPair> pairs = {
      {Score(1), 2.0}, {Score(2), 2.0}, {Score(3), 2.0}};
  const MetricReport r = compute_metrics(pairs);
  CHECK(r.rmse == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
  CHECK(r.rmse == doctest::Approx(0.81650).epsilon(1e-4));
  CHECK(r.mae == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(r.mae == doctest::Approx(0.66667).epsilon(1e-4));
}

TEST_CASE("compute_metrics rejects empty input") {
  CHECK_THROWS_AS(compute_metrics({}), DataError);
}

TEST_CASE("postprocess examples") {
  CHECK(postprocess(2.4).value() == 2);
  CHECK(postprocess(4.9).value() == 4);
  CHECK(postprocess(-0.3).value() == 0);
  // ties round away from zero
  CHECK(postprocess(2.5).value() == 3);
  CHECK(postprocess(0.5).value() == 1);
  CHECK(postprocess(3.5).value() == 4);
  CHECK(postprocess(-0.5).value() == 0);
}

TEST_CASE("postprocess rejects non-finite") {
  CHECK_THROWS_AS(postprocess(std::nan("")), NumericError);
  CHECK_THROWS_AS(postprocess(std::numeric_limits<double>::infinity()),
                  NumericError);
}

TEST_CASE("postprocess range and idempotence") {
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const double x = rng.uniform(-10.0, 10.0);
    const int v = postprocess(x).value();
    CHECK(v >= 0);
    CHECK(v <= 4);
    CHECK(postprocess(static_cast<double>(v)).value() == v);
  }
}

TEST_CASE("mae <= rmse always, equality iff equal magnitudes") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.uniform_int(1, 30);
    std::vector<PredictionPair> pairs;
    for (int i = 0; i < n; ++i)
      pairs.emplace_back(Score(rng.uniform_int(0, 4)), rng.uniform(-1.0, 5.0));
    const MetricReport r = compute_metrics(pairs);
    CHECK(r.mae <= r.rmse + 1e-12);

    std::vector<double> abs_errors;
    for (const auto& p : pairs)
      abs_errors.push_back(std::fabs(p.truth.value() - p.predicted));
    const bool all_equal =
        std::all_of(abs_errors.begin(), abs_errors.end(), [&](double e) {
          return std::fabs(e - abs_errors[0]) < 1e-12;
        });
    if (all_equal)
      CHECK(r.mae == doctest::Approx(r.rmse).epsilon(1e-12));
    else
      CHECK(r.mae < r.rmse);
  }
}

TEST_CASE("compute_metrics is permutation invariant") {
  Rng rng(13);
  std::vector<PredictionPair> pairs;
  for (int i = 0; i < 20; ++i)
    pairs.emplace_back(Score(rng.uniform_int(0, 4)), rng.uniform(0.0, 4.0));
  const MetricReport a = compute_metrics(pairs);
  std::reverse(pairs.begin(), pairs.end());
  const MetricReport b = compute_metrics(pairs);
  CHECK(a.rmse == b.rmse);
  CHECK(a.mae == b.mae);
}

TEST_CASE("domain types validate") {
  CHECK_THROWS_AS(QuestionId(0), DataError);
  CHECK_THROWS_AS(QuestionId(13), DataError);
  CHECK_THROWS_AS(Score(5), DataError);
  CHECK_THROWS_AS(Score(-1), DataError);
  CHECK(QuestionId::all().size() == 12);
}

}  // TEST_SUITE
