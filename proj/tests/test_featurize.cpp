#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "alsprog/csv.hpp"
#include "alsprog/error.hpp"
#include "alsprog/featurize.hpp"
#include "alsprog/rng.hpp"
#include "alsprog/stats.hpp"

using namespace alsprog;

namespace {

std::vector<SensorSample> samples(const std::vector<double>& values, int day0 = 0) {
  std::vector<SensorSample> out;
  for (std::size_t i = 0; i < values.size(); ++i)
    out.push_back({day0 + static_cast<int>(i), values[i]});
  return out;
}

// brute-force Spearman: O(n^2) ranks then textbook Pearson
double brute_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  auto rank = [n](const std::vector<double>& v, std::size_t i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (v[j] < v[i]) ++less;
      if (v[j] == v[i]) ++equal;
    }
    return less + 0.5 * (equal + 1);
  };
  std::vector<double> rx(n), ry(n);
  for (std::size_t i = 0; i < n; ++i) {
    rx[i] = rank(x, i);
    ry[i] = rank(y, i);
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

FeatureMatrix tiny_matrix(const std::vector<std::vector<double>>& rows,
                          const std::vector<std::string>& columns,
                          const std::vector<ColumnKind>& kinds,
                          const std::vector<int>& targets) {
  FeatureMatrix m;
  m.columns = columns;
  m.kinds = kinds;
  m.rows = rows;
  m.targets = targets;
  for (std::size_t i = 0; i < rows.size(); ++i)
    m.keys.push_back(RowKey{"p" + std::to_string(i), 1, 0, 100});
  return m;
}

}  // namespace

TEST_SUITE("featurize") {

TEST_CASE("median extractor") {
  CHECK(ext_median(samples({1, 3, 2})) == 2.0);
  CHECK(ext_median(samples({1, 2, 3, 4})) == 2.5);
  CHECK(std::isnan(ext_median({})));
}

TEST_CASE("quantile with linear interpolation") {
  const auto s = samples({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(ext_quantile(s, 0.1) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(ext_quantile(s, 0.25) == doctest::Approx(2.25).epsilon(1e-15));
}

TEST_CASE("rmssd") {
  CHECK(ext_rmssd(samples({3, 5, 9})) ==
        doctest::Approx(std::sqrt(10.0)).epsilon(1e-15));
  CHECK(std::isnan(ext_rmssd(samples({5}))));
}

TEST_CASE("constant series degenerates") {
  const auto s = samples({2, 2, 2});
  CHECK(ext_std(s) == 0.0);
  CHECK(ext_range(s) == 0.0);
  CHECK(ext_linear_slope(s) == 0.0);
  CHECK(std::isnan(ext_benford_correlation(s)));
}

TEST_CASE("count handles empty slices") {
  CHECK(ext_count({}) == 0.0);
  CHECK(ext_count(samples({1, 2})) == 2.0);
}

TEST_CASE("linear slope is OLS against the day axis") {
  // y = 2*day + 1 exactly
  std::vector<SensorSample> s = {{10, 21}, {12, 25}, {15, 31}};
  CHECK(ext_linear_slope(s) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("benford correlation sanity") {
  // Benford-distributed digit counts correlate to ~1
  std::vector<double> v;
  for (int d = 1; d <= 9; ++d) {
    const int count = static_cast<int>(std::round(1000 * std::log10(1.0 + 1.0 / d)));
    for (int i = 0; i < count; ++i) v.push_back(d * 1.0);
  }
  CHECK(ext_benford_correlation(samples(v)) > 0.999);
  // zeros are skipped; all-zero slices are degenerate
  CHECK(std::isnan(ext_benford_correlation(samples({0, 0, 0}))));
}

TEST_CASE("catalog has the fixed 15 extractors") {
  CHECK(extractor_catalog().size() == 15);
  std::vector<std::pair<std::string, double>> out;
  extract_channel_features("beat_to_beat_cvsd", samples({1, 2, 3}),
                           FeatureMode::catalog, out);
  REQUIRE(out.size() == 15);
  CHECK(out[2].first == "beat_to_beat_cvsd__median");
  bool found = false;
  for (const auto& [name, value] : out)
    if (name == "beat_to_beat_cvsd__quantile__q_0.6") found = true;
  CHECK(found);
}

TEST_CASE("median mode emits one feature per channel") {
  std::vector<std::pair<std::string, double>> out;
  extract_channel_features("steps", samples({1, 3, 2}), FeatureMode::median, out);
  REQUIRE(out.size() == 1);
  CHECK(out[0].first == "steps__median");
  CHECK(out[0].second == 2.0);
}

TEST_CASE("prune drops by missing fraction") {
  const double nan = std::nan("");
  auto m = tiny_matrix({{1.0, nan}, {2.0, nan}, {3.0, 7.0}, {4.0, nan}, {5.0, 6.0}},
                       {"a", "b"}, {ColumnKind::sensor, ColumnKind::sensor},
                       {0, 1, 2, 3, 4});
  const ColumnTransform t = fit_prune(m, PruneConfig{0.3, 1e-12});
  CHECK(t.columns == std::vector<std::string>{"a"});
  REQUIRE(t.dropped.size() == 1);
  CHECK(t.dropped[0].column == "b");
  CHECK(t.dropped[0].reason == "missing_frac");
}

TEST_CASE("prune drops constant columns") {
  auto m = tiny_matrix({{1.0, 5.0}, {2.0, 5.0}, {3.0, 5.0}}, {"a", "b"},
                       {ColumnKind::sensor, ColumnKind::sensor}, {0, 1, 2});
  const ColumnTransform t = fit_prune(m, PruneConfig{0.3, 1e-12});
  CHECK(t.columns == std::vector<std::string>{"a"});
  CHECK(t.dropped[0].reason == "low_variance");
}

TEST_CASE("prune imputes survivors with the column median") {
  const double nan = std::nan("");
  auto m = tiny_matrix({{1.0}, {nan}, {3.0}}, {"a"}, {ColumnKind::sensor},
                       {0, 1, 2});
  const ColumnTransform t = fit_prune(m, PruneConfig{0.5, 1e-12});
  REQUIRE(t.columns.size() == 1);
  CHECK(t.impute_medians[0] == 2.0);
  const FeatureMatrix imputed = apply_transform(m, t);
  CHECK(imputed.rows[1][0] == 2.0);
  CHECK(imputed.rows[0][0] == 1.0);
}

TEST_CASE("pruning everything is an error") {
  auto m = tiny_matrix({{5.0}, {5.0}}, {"a"}, {ColumnKind::sensor}, {0, 1});
  CHECK_THROWS_AS(fit_prune(m, PruneConfig{0.3, 1e-12}), DataError);
}

TEST_CASE("apply_transform rejects unseen columns") {
  auto m = tiny_matrix({{1.0}, {2.0}}, {"a"}, {ColumnKind::sensor}, {0, 1});
  ColumnTransform t;
  t.columns = {"zz"};
  t.kinds = {ColumnKind::sensor};
  t.impute_medians = {0.0};
  CHECK_THROWS_AS(apply_transform(m, t), DataError);
}

TEST_CASE("spearman perfect monotone and antitone") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> up = {2, 4, 6, 8, 10};
  const std::vector<double> down = {5, 4, 3, 2, 1};
  const SpearmanResult a = spearman_test(x, up);
  CHECK(a.testable);
  CHECK(a.rho == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(a.p == 0.0);
  const SpearmanResult b = spearman_test(x, down);
  CHECK(b.rho == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(b.p == 0.0);
}

TEST_CASE("spearman needs five points and variance") {
  const std::vector<double> x = {1, 2, 3, 4};
  const std::vector<double> y = {1, 2, 3, 4};
  CHECK(!spearman_test(x, y).testable);
  const std::vector<double> c = {7, 7, 7, 7, 7};
  const std::vector<double> z = {1, 2, 3, 4, 5};
  const SpearmanResult r = spearman_test(c, z);
  CHECK(!r.testable);
  CHECK(r.reason == "zero_variance");
}

TEST_CASE("spearman equals the brute-force oracle on 100 random vectors") {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.uniform_int(5, 40);
    std::vector<double> x, y;
    const bool tied = trial % 2 == 0;
    for (int i = 0; i < n; ++i) {
      x.push_back(tied ? static_cast<double>(rng.uniform_int(0, 5))
                       : rng.uniform(-3.0, 3.0));
      y.push_back(tied ? static_cast<double>(rng.uniform_int(0, 5))
                       : rng.uniform(-3.0, 3.0));
    }
    const SpearmanResult r = spearman_test(x, y);
    if (!r.testable) continue;  // a tied draw can be constant
    CHECK(r.rho == doctest::Approx(brute_spearman(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("spearman is invariant under strictly increasing transforms") {
  Rng rng(7);
  std::vector<double> x, y;
  for (int i = 0; i < 25; ++i) {
    x.push_back(rng.uniform(-2.0, 2.0));
    y.push_back(rng.uniform(-2.0, 2.0));
  }
  const SpearmanResult base = spearman_test(x, y);
  std::vector<double> ex;
  for (const double v : x) ex.push_back(std::exp(v));
  const SpearmanResult transformed = spearman_test(ex, y);
  CHECK(base.rho == doctest::Approx(transformed.rho).epsilon(1e-14));
  // rho(x, x) = 1 for non-constant x
  CHECK(spearman_test(x, x).rho == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("benjamini-yekutieli hand example") {
  const std::vector<double> p = {0.01, 0.02, 0.04};
  const auto adj = benjamini_yekutieli(p);
  REQUIRE(adj.size() == 3);
  CHECK(adj[0] == doctest::Approx(0.055).epsilon(1e-10));
  CHECK(adj[1] == doctest::Approx(0.055).epsilon(1e-10));
  CHECK(adj[2] == doctest::Approx(0.04 * 5.5 / 3.0).epsilon(1e-10));
}

TEST_CASE("benjamini-yekutieli of one test is the identity") {
  const std::vector<double> p = {0.04};
  CHECK(benjamini_yekutieli(p)[0] == doctest::Approx(0.04).epsilon(1e-14));
}

TEST_CASE("benjamini-yekutieli monotone and above raw") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = rng.uniform_int(1, 30);
    std::vector<double> p;
    for (int i = 0; i < m; ++i) p.push_back(rng.uniform(0.0, 1.0));
    const auto adj = benjamini_yekutieli(p);
    std::vector<std::size_t> order(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    for (std::size_t i = 0; i < order.size(); ++i) {
      CHECK(adj[order[i]] >= p[order[i]] - 1e-15);
      if (i > 0) CHECK(adj[order[i]] >= adj[order[i - 1]] - 1e-15);
      CHECK(adj[order[i]] <= 1.0);
    }
  }
}

TEST_CASE("fdr_select keep_all vs top_k") {
  std::vector<RelevanceInput> inputs;
  inputs.push_back({"f1", true, "", 0.9, 0.001, 20});
  inputs.push_back({"f2", true, "", 0.5, 0.2, 20});
  inputs.push_back({"f3", true, "", 0.3, 0.6, 20});
  inputs.push_back({"f4", false, "zero_variance", 0, 1, 20});

  SelectionConfig keep;
  keep.mode = SelectionMode::keep_all;
  keep.fdr_level = 0.05;
  const RelevanceReport r1 = fdr_select(1, inputs, keep);
  CHECK(r1.rows[0].selected);
  CHECK(!r1.rows[1].selected);
  CHECK(!r1.rows[3].selected);  // untestable never selected

  SelectionConfig top;
  top.mode = SelectionMode::top_k;
  top.top_k = 10;  // k >= m saturates
  const RelevanceReport r2 = fdr_select(1, inputs, top);
  CHECK(r2.rows[0].selected);
  CHECK(r2.rows[1].selected);
  CHECK(r2.rows[2].selected);
  CHECK(!r2.rows[3].selected);

  top.top_k = 1;
  const RelevanceReport r3 = fdr_select(1, inputs, top);
  CHECK(r3.rows[0].selected);
  CHECK(!r3.rows[1].selected);
}

TEST_CASE("single p below level is selected") {
  std::vector<RelevanceInput> inputs = {{"f", true, "", 0.8, 0.04, 10}};
  SelectionConfig cfg;
  const RelevanceReport r = fdr_select(1, inputs, cfg);
  CHECK(r.rows[0].p_adj == doctest::Approx(0.04).epsilon(1e-14));
  CHECK(r.rows[0].selected);
}

TEST_CASE("features csv round-trips the matrix exactly") {
  const double nan = std::nan("");
  FeatureMatrix m;
  m.columns = {"days_since_diagnosis", "previous_value", "delta_days",
               "followup_index", "age", "ch__median"};
  m.kinds = {ColumnKind::engineered, ColumnKind::engineered,
             ColumnKind::engineered, ColumnKind::engineered,
             ColumnKind::static_field, ColumnKind::sensor};
  m.keys = {RowKey{"p1", 3, 100, 190}, RowKey{"p2", 3, 50, 160}};
  m.rows = {{100, 4, 90, 1, 61.5, 0.12345678901234567},
            {50, 3, 110, 1, 58.0, nan}};
  m.targets = {3, 2};

  const auto path = std::filesystem::temp_directory_path() / "alsprog_feat_test.csv";
  write_features_csv(path, m);
  const FeatureMatrix back = read_features_csv(path);
  std::filesystem::remove(path);

  CHECK(back.columns == m.columns);
  REQUIRE(back.rows.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.keys[i].patient_id == m.keys[i].patient_id);
    CHECK(back.keys[i].question == m.keys[i].question);
    CHECK(back.keys[i].window_start == m.keys[i].window_start);
    CHECK(back.keys[i].window_end == m.keys[i].window_end);
    CHECK(back.targets[i] == m.targets[i]);
    for (std::size_t c = 0; c < m.columns.size(); ++c) {
      if (std::isnan(m.rows[i][c]))
        CHECK(std::isnan(back.rows[i][c]));
      else
        CHECK(back.rows[i][c] == m.rows[i][c]);  // bit-exact round-trip
    }
  }
  for (std::size_t c = 0; c < m.columns.size(); ++c)
    CHECK(back.kinds[c] == m.kinds[c]);
}

}  // TEST_SUITE
