#include "alsprog/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "alsprog/csv.hpp"
#include "alsprog/error.hpp"
#include "alsprog/parallel.hpp"
#include "alsprog/stats.hpp"

namespace alsprog {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::array<std::string, 4> kEngineered = {
    "days_since_diagnosis", "previous_value", "delta_days", "followup_index"};

std::vector<double> slice_values(std::span<const SensorSample> s) {
  std::vector<double> v;
  v.reserve(s.size());
  for (const auto& x : s) v.push_back(x.value);
  return v;
}

int first_significant_digit(double x) {
  x = std::fabs(x);
  const double e = std::floor(std::log10(x));
  int d = static_cast<int>(x / std::pow(10.0, e));
  if (d < 1) d = 1;
  if (d > 9) d = 9;
  return d;
}

}  // namespace

std::string to_string(FeatureMode m) {
  return m == FeatureMode::median ? "median" : "catalog";
}

FeatureMode feature_mode_from_string(const std::string& s) {
  if (s == "median") return FeatureMode::median;
  if (s == "catalog") return FeatureMode::catalog;
  throw ConfigError("unknown feature mode '" + s + "', expected median|catalog");
}

const std::vector<std::string>& extractor_catalog() {
  static const std::vector<std::string> names = {
      "count",          "mean",           "median",
      "std",            "min",            "max",
      "range",          "quantile__q_0.1", "quantile__q_0.25",
      "quantile__q_0.6", "quantile__q_0.75", "quantile__q_0.9",
      "rmssd",          "linear_slope",   "benford_correlation"};
  return names;
}

double ext_count(std::span<const SensorSample> s) {
  return static_cast<double>(s.size());
}

double ext_mean(std::span<const SensorSample> s) {
  if (s.empty()) return kNaN;
  double sum = 0;
  for (const auto& x : s) sum += x.value;
  return sum / static_cast<double>(s.size());
}

double ext_median(std::span<const SensorSample> s) {
  if (s.empty()) return kNaN;
  return stats::median(slice_values(s));
}

double ext_std(std::span<const SensorSample> s) {
  if (s.empty()) return kNaN;
  return std::sqrt(stats::variance(slice_values(s)));
}

double ext_min(std::span<const SensorSample> s) {
  if (s.empty()) return kNaN;
  double m = s[0].value;
  for (const auto& x : s) m = std::min(m, x.value);
  return m;
}

double ext_max(std::span<const SensorSample> s) {
  if (s.empty()) return kNaN;
  double m = s[0].value;
  for (const auto& x : s) m = std::max(m, x.value);
  return m;
}

double ext_range(std::span<const SensorSample> s) {
  if (s.empty()) return kNaN;
  return ext_max(s) - ext_min(s);
}

double ext_quantile(std::span<const SensorSample> s, double q) {
  if (s.empty()) return kNaN;
  auto v = slice_values(s);
  std::sort(v.begin(), v.end());
  return stats::quantile(v, q);
}

double ext_rmssd(std::span<const SensorSample> s) {
  if (s.size() < 2) return kNaN;
  double acc = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double d = s[i].value - s[i - 1].value;
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(s.size() - 1));
}

double ext_linear_slope(std::span<const SensorSample> s) {
  if (s.size() < 2) return kNaN;
  double md = 0, mv = 0;
  for (const auto& x : s) {
    md += x.day;
    mv += x.value;
  }
  md /= static_cast<double>(s.size());
  mv /= static_cast<double>(s.size());
  double num = 0, den = 0;
  for (const auto& x : s) {
    num += (x.day - md) * (x.value - mv);
    den += (x.day - md) * (x.day - md);
  }
  if (den == 0) return kNaN;
  return num / den;
}

double ext_benford_correlation(std::span<const SensorSample> s) {
  // first-significant-digit frequencies of |x| (zeros skipped) against
  // the Benford distribution P(d) = log10(1 + 1/d)
  std::array<double, 9> counts = {};
  double total = 0;
  for (const auto& x : s) {
    if (x.value == 0.0 || !std::isfinite(x.value)) continue;
    ++counts[first_significant_digit(x.value) - 1];
    ++total;
  }
  if (total == 0) return kNaN;
  int distinct = 0;
  for (const double c : counts)
    if (c > 0) ++distinct;
  if (distinct < 2) return kNaN;  // degenerate observed distribution
  std::array<double, 9> freq, benford;
  for (int d = 1; d <= 9; ++d) {
    freq[d - 1] = counts[d - 1] / total;
    benford[d - 1] = std::log10(1.0 + 1.0 / d);
  }
  const double r = stats::pearson(freq, benford);
  return std::isnan(r) ? kNaN : r;
}

void extract_channel_features(std::string_view channel,
                              std::span<const SensorSample> slice,
                              FeatureMode mode,
                              std::vector<std::pair<std::string, double>>& out) {
  const std::string prefix = std::string(channel) + "__";
  if (mode == FeatureMode::median) {
    out.emplace_back(prefix + "median", ext_median(slice));
    return;
  }
  out.emplace_back(prefix + "count", ext_count(slice));
  out.emplace_back(prefix + "mean", ext_mean(slice));
  out.emplace_back(prefix + "median", ext_median(slice));
  out.emplace_back(prefix + "std", ext_std(slice));
  out.emplace_back(prefix + "min", ext_min(slice));
  out.emplace_back(prefix + "max", ext_max(slice));
  out.emplace_back(prefix + "range", ext_range(slice));
  out.emplace_back(prefix + "quantile__q_0.1", ext_quantile(slice, 0.1));
  out.emplace_back(prefix + "quantile__q_0.25", ext_quantile(slice, 0.25));
  out.emplace_back(prefix + "quantile__q_0.6", ext_quantile(slice, 0.6));
  out.emplace_back(prefix + "quantile__q_0.75", ext_quantile(slice, 0.75));
  out.emplace_back(prefix + "quantile__q_0.9", ext_quantile(slice, 0.9));
  out.emplace_back(prefix + "rmssd", ext_rmssd(slice));
  out.emplace_back(prefix + "linear_slope", ext_linear_slope(slice));
  out.emplace_back(prefix + "benford_correlation", ext_benford_correlation(slice));
}

std::size_t FeatureMatrix::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw DataError("unseen feature column '" + std::string(name) + "'");
}

FeatureMatrix build_feature_matrix(std::span<const AlignedPatient> patients,
                                   std::span<const ObservationWindow> windows,
                                   std::span<const StaticRecord> statics,
                                   const StaticEncoder& encoder,
                                   FeatureMode mode, int threads) {
  std::unordered_map<std::string, const AlignedPatient*> by_id;
  for (const auto& p : patients) by_id[p.patient_id] = &p;

  std::set<std::string> channel_set;
  for (const auto& p : patients)
    for (const auto& s : p.series) channel_set.insert(s.channel);
  const std::vector<std::string> channels(channel_set.begin(), channel_set.end());

  FeatureMatrix m;
  for (const auto& c : kEngineered) {
    m.columns.push_back(c);
    m.kinds.push_back(ColumnKind::engineered);
  }
  for (const auto& c : encoder.columns()) {
    m.columns.push_back(c);
    m.kinds.push_back(ColumnKind::static_field);
  }
  const std::size_t sensor_start = m.columns.size();
  for (const auto& ch : channels) {
    if (mode == FeatureMode::median) {
      m.columns.push_back(ch + "__median");
      m.kinds.push_back(ColumnKind::sensor);
    } else {
      for (const auto& ex : extractor_catalog()) {
        m.columns.push_back(ch + "__" + ex);
        m.kinds.push_back(ColumnKind::sensor);
      }
    }
  }

  std::unordered_map<std::string, std::vector<double>> static_cache;
  for (const auto& rec : statics) static_cache[rec.patient_id] = encoder.encode(rec);

  m.keys.resize(windows.size());
  m.rows.assign(windows.size(), {});
  m.targets.resize(windows.size());

  parallel_for(windows.size(), threads, [&](std::size_t i) {
    const ObservationWindow& w = windows[i];
    const auto pit = by_id.find(w.patient_id);
    if (pit == by_id.end())
      throw DataError("window references unknown patient " + w.patient_id);
    const AlignedPatient& patient = *pit->second;

    std::vector<double> row(m.columns.size(), kNaN);
    row[0] = w.days_since_diagnosis;
    row[1] = w.previous_value.value();
    row[2] = w.delta_days;
    row[3] = w.followup_index;

    const auto sit = static_cache.find(w.patient_id);
    if (sit == static_cache.end())
      throw DataError("no static record for patient " + w.patient_id);
    for (std::size_t j = 0; j < sit->second.size(); ++j)
      row[kEngineered.size() + j] = sit->second[j];

    std::vector<std::pair<std::string, double>> feats;
    std::size_t col = sensor_start;
    for (const auto& ch : channels) {
      std::span<const SensorSample> slice;
      for (const auto& s : patient.series) {
        if (s.channel != ch) continue;
        const auto lo = std::lower_bound(
            s.samples.begin(), s.samples.end(), w.window_start,
            [](const SensorSample& x, int v) { return x.day < v; });
        const auto hi = std::lower_bound(
            s.samples.begin(), s.samples.end(), w.window_end,
            [](const SensorSample& x, int v) { return x.day < v; });
        slice = std::span<const SensorSample>(s.samples.data() + (lo - s.samples.begin()),
                                              static_cast<std::size_t>(hi - lo));
        break;
      }
      feats.clear();
      extract_channel_features(ch, slice, mode, feats);
      for (const auto& [name, value] : feats) row[col++] = value;
    }

    m.keys[i] = RowKey{w.patient_id, w.question.index(), w.window_start, w.window_end};
    m.rows[i] = std::move(row);
    m.targets[i] = w.target_value.value();
  });

  return m;
}

FeatureMatrix subset_rows(const FeatureMatrix& m, std::span<const std::size_t> idx) {
  FeatureMatrix out;
  out.columns = m.columns;
  out.kinds = m.kinds;
  for (const std::size_t i : idx) {
    out.keys.push_back(m.keys[i]);
    out.rows.push_back(m.rows[i]);
    out.targets.push_back(m.targets[i]);
  }
  return out;
}

std::vector<std::size_t> rows_for_question(const FeatureMatrix& m, QuestionId q) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.keys.size(); ++i)
    if (m.keys[i].question == q.index()) out.push_back(i);
  return out;
}

std::vector<std::size_t> rows_for_patients(const FeatureMatrix& m,
                                           std::span<const std::string> patients) {
  const std::set<std::string> set(patients.begin(), patients.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.keys.size(); ++i)
    if (set.count(m.keys[i].patient_id)) out.push_back(i);
  return out;
}

ColumnTransform fit_prune(const FeatureMatrix& m, const PruneConfig& cfg) {
  if (m.rows.empty()) throw DataError("prune_features: empty matrix");
  ColumnTransform t;
  for (std::size_t c = 0; c < m.columns.size(); ++c) {
    std::vector<double> present;
    present.reserve(m.rows.size());
    for (const auto& row : m.rows)
      if (!std::isnan(row[c])) present.push_back(row[c]);
    const double missing_frac =
        1.0 - static_cast<double>(present.size()) / static_cast<double>(m.rows.size());
    if (missing_frac > cfg.max_missing_frac) {
      t.dropped.push_back({m.columns[c], "missing_frac", missing_frac});
      continue;
    }
    const double var = stats::variance(present);
    if (var < cfg.min_variance) {
      t.dropped.push_back({m.columns[c], "low_variance", var});
      continue;
    }
    t.columns.push_back(m.columns[c]);
    t.kinds.push_back(m.kinds[c]);
    t.impute_medians.push_back(stats::median(present));
  }
  if (t.columns.empty())
    throw DataError(
        "prune_features: every column pruned; relax max_missing_frac or "
        "min_variance");
  return t;
}

FeatureMatrix apply_transform(const FeatureMatrix& m, const ColumnTransform& t) {
  std::vector<std::size_t> src;
  src.reserve(t.columns.size());
  for (const auto& name : t.columns) src.push_back(m.column_index(name));

  FeatureMatrix out;
  out.columns = t.columns;
  out.kinds = t.kinds;
  out.keys = m.keys;
  out.targets = m.targets;
  out.rows.reserve(m.rows.size());
  for (const auto& row : m.rows) {
    std::vector<double> r(t.columns.size());
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
      const double v = row[src[j]];
      r[j] = std::isnan(v) ? t.impute_medians[j] : v;
    }
    out.rows.push_back(std::move(r));
  }
  return out;
}

SpearmanResult spearman_test(std::span<const double> x, std::span<const double> y) {
  SpearmanResult r;
  if (x.size() != y.size())
    throw DataError("spearman_test: length mismatch");
  r.n = x.size();
  if (r.n < 5) {
    r.reason = "n_lt_5";
    return r;
  }
  const auto rx = stats::average_ranks(x);
  const auto ry = stats::average_ranks(y);
  const double rho = stats::pearson(rx, ry);
  if (std::isnan(rho)) {
    r.reason = "zero_variance";
    return r;
  }
  r.testable = true;
  r.rho = rho;
  const double df = static_cast<double>(r.n - 2);
  if (1.0 - rho * rho <= 0) {
    r.p = 0.0;
    return r;
  }
  const double t = rho * std::sqrt(df / (1.0 - rho * rho));
  r.p = stats::t_two_sided_p(t, df);
  return r;
}

std::vector<double> benjamini_yekutieli(std::span<const double> p_values) {
  const std::size_t m = p_values.size();
  if (m == 0) return {};
  double cm = 0;
  for (std::size_t j = 1; j <= m; ++j) cm += 1.0 / static_cast<double>(j);

  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (p_values[a] != p_values[b]) return p_values[a] < p_values[b];
    return a < b;
  });

  std::vector<double> adjusted(m, 0.0);
  double running = std::numeric_limits<double>::infinity();
  for (std::size_t i = m; i > 0; --i) {
    const std::size_t idx = order[i - 1];
    const double raw = static_cast<double>(m) * cm * p_values[idx] /
                       static_cast<double>(i);
    running = std::min(running, raw);
    adjusted[idx] = std::min(1.0, running);
  }
  return adjusted;
}

std::string to_string(SelectionMode m) {
  return m == SelectionMode::keep_all ? "keep_all" : "top_k";
}

SelectionMode selection_mode_from_string(const std::string& s) {
  if (s == "keep_all") return SelectionMode::keep_all;
  if (s == "top_k") return SelectionMode::top_k;
  throw ConfigError("unknown selection mode '" + s + "', expected keep_all|top_k");
}

std::vector<std::string> RelevanceReport::selected_features() const {
  std::vector<std::string> out;
  for (const auto& r : rows)
    if (r.selected) out.push_back(r.feature);
  return out;
}

RelevanceReport fdr_select(int question, std::vector<RelevanceInput> tested,
                           const SelectionConfig& cfg) {
  RelevanceReport report;
  report.question = question;

  std::vector<std::size_t> testable_idx;
  std::vector<double> p;
  for (std::size_t i = 0; i < tested.size(); ++i) {
    if (tested[i].testable) {
      testable_idx.push_back(i);
      p.push_back(tested[i].p);
    }
  }
  const auto adjusted = benjamini_yekutieli(p);

  report.rows.resize(tested.size());
  for (std::size_t i = 0; i < tested.size(); ++i) {
    RelevanceRow& row = report.rows[i];
    row.feature = tested[i].feature;
    row.testable = tested[i].testable;
    row.reason = tested[i].reason;
    row.rho = tested[i].rho;
    row.p = tested[i].p;
    row.n = tested[i].n;
    row.p_adj = std::numeric_limits<double>::quiet_NaN();
  }
  for (std::size_t k = 0; k < testable_idx.size(); ++k)
    report.rows[testable_idx[k]].p_adj = adjusted[k];

  if (cfg.mode == SelectionMode::keep_all) {
    for (const std::size_t i : testable_idx)
      report.rows[i].selected = report.rows[i].p_adj <= cfg.fdr_level;
  } else {
    std::vector<std::size_t> ranked = testable_idx;
    std::sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
      if (report.rows[a].p != report.rows[b].p)
        return report.rows[a].p < report.rows[b].p;
      return report.rows[a].feature < report.rows[b].feature;
    });
    const std::size_t k = std::min<std::size_t>(ranked.size(),
                                                static_cast<std::size_t>(cfg.top_k));
    for (std::size_t i = 0; i < k; ++i) report.rows[ranked[i]].selected = true;
  }
  return report;
}

RelevanceReport relevance_for_question(const FeatureMatrix& m, QuestionId q,
                                       const SelectionConfig& cfg) {
  std::vector<double> targets(m.targets.begin(), m.targets.end());
  std::vector<RelevanceInput> inputs;
  for (std::size_t c = 0; c < m.columns.size(); ++c) {
    if (m.kinds[c] != ColumnKind::sensor) continue;
    std::vector<double> x;
    std::vector<double> y;
    x.reserve(m.rows.size());
    y.reserve(m.rows.size());
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
      if (std::isnan(m.rows[i][c])) continue;
      x.push_back(m.rows[i][c]);
      y.push_back(targets[i]);
    }
    const SpearmanResult r = spearman_test(x, y);
    inputs.push_back(RelevanceInput{m.columns[c], r.testable, r.reason, r.rho,
                                    r.p, r.n});
  }
  return fdr_select(q.index(), std::move(inputs), cfg);
}

void write_features_csv(const std::filesystem::path& path, const FeatureMatrix& m) {
  std::vector<std::string> header = {"patient_id", "question"};
  for (const auto& c : m.columns) header.push_back(c);
  header.push_back("future_value");

  std::vector<std::vector<std::string>> rows;
  rows.reserve(m.rows.size());
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    std::vector<std::string> row;
    row.reserve(header.size());
    row.push_back(m.keys[i].patient_id);
    row.push_back(csv::format_int(m.keys[i].question));
    for (const double v : m.rows[i]) row.push_back(csv::format_double(v));
    row.push_back(csv::format_int(m.targets[i]));
    rows.push_back(std::move(row));
  }
  csv::write_file(path, header, rows);
}

FeatureMatrix read_features_csv(const std::filesystem::path& path,
                                bool require_targets) {
  const csv::Table t = csv::read_file(path);
  if (t.header.size() < 3 || t.header[0] != "patient_id" || t.header[1] != "question")
    throw DataError(path.string() + ": features file must start with patient_id,question");

  const bool has_target = t.header.back() == "future_value";
  if (require_targets && !has_target)
    throw DataError(path.string() + ": missing future_value column");

  FeatureMatrix m;
  const std::size_t n_feature_cols = t.header.size() - 2 - (has_target ? 1 : 0);
  for (std::size_t c = 0; c < n_feature_cols; ++c) {
    const std::string& name = t.header[2 + c];
    m.columns.push_back(name);
    const bool engineered =
        std::find(kEngineered.begin(), kEngineered.end(), name) != kEngineered.end();
    if (engineered)
      m.kinds.push_back(ColumnKind::engineered);
    else if (name.find("__") != std::string::npos)
      m.kinds.push_back(ColumnKind::sensor);
    else
      m.kinds.push_back(ColumnKind::static_field);
  }

  const auto start_col = m.column_index("days_since_diagnosis");
  const auto delta_col = m.column_index("delta_days");

  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string ctx = path.string() + ":" + std::to_string(r + 2);
    RowKey key;
    key.patient_id = row[0];
    key.question = csv::parse_int(row[1], ctx);
    std::vector<double> values(n_feature_cols, kNaN);
    for (std::size_t c = 0; c < n_feature_cols; ++c)
      if (!row[2 + c].empty()) values[c] = csv::parse_double(row[2 + c], ctx);
    key.window_start = static_cast<int>(values[start_col]);
    key.window_end = key.window_start + static_cast<int>(values[delta_col]);
    m.keys.push_back(std::move(key));
    m.rows.push_back(std::move(values));
    if (has_target)
      m.targets.push_back(csv::parse_int(row.back(), ctx));
    else
      m.targets.push_back(0);
  }
  return m;
}

}  // namespace alsprog
