#include "alsprog/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "alsprog/csv.hpp"
#include "alsprog/error.hpp"
#include "alsprog/stats.hpp"

namespace alsprog {

namespace {

constexpr std::size_t kMaxDiagnostics = 25;

class DiagnosticLog {
 public:
  void add(const std::filesystem::path& file, std::size_t row_1based,
           const std::string& msg) {
    ++count_;
    if (lines_.size() < kMaxDiagnostics) {
      lines_.push_back(file.filename().string() + ":" +
                       std::to_string(row_1based) + ": " + msg);
    }
  }

  void add(const std::string& msg) {
    ++count_;
    if (lines_.size() < kMaxDiagnostics) lines_.push_back(msg);
  }

  void raise_if_any() const {
    if (count_ == 0) return;
    std::ostringstream out;
    out << count_ << " data error(s):";
    for (const auto& l : lines_) out << "\n  " << l;
    if (count_ > lines_.size())
      out << "\n  ... " << (count_ - lines_.size()) << " more";
    throw DataError(out.str());
  }

 private:
  std::size_t count_ = 0;
  std::vector<std::string> lines_;
};

bool parses_as_double(const std::string& s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(v);
}

// Identifiers travel through CSV headers, feature-column names (with the
// "__" channel/extractor separator) and model documents, so they must stay
// free of the characters those formats use structurally.
bool valid_identifier(const std::string& s) {
  if (s.empty()) return false;
  if (s.find("__") != std::string::npos) return false;
  for (const char c : s)
    if (c == ',' || c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
  return true;
}

std::vector<StaticRecord> load_statics(const std::filesystem::path& path,
                                       DiagnosticLog& log) {
  const csv::Table t = csv::read_file(path);
  if (t.header.empty() || t.header[0] != "patient_id")
    throw DataError(path.string() + ": first column must be patient_id");
  for (std::size_t c = 1; c < t.header.size(); ++c) {
    if (!valid_identifier(t.header[c]))
      throw DataError(path.string() + ": invalid field name '" + t.header[c] + "'");
  }

  // column typing: numeric iff every non-empty cell parses as a number
  std::vector<bool> numeric(t.header.size(), true);
  for (const auto& row : t.rows) {
    for (std::size_t c = 1; c < row.size(); ++c)
      if (!row[c].empty() && !parses_as_double(row[c])) numeric[c] = false;
  }

  std::vector<StaticRecord> out;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t line = r + 2;
    StaticRecord rec;
    rec.patient_id = row[0];
    if (!valid_identifier(rec.patient_id)) {
      log.add(path, line, "invalid patient_id '" + row[0] + "'");
      continue;
    }
    if (!seen.insert(rec.patient_id).second) {
      log.add(path, line, "duplicate patient_id '" + rec.patient_id + "'");
      continue;
    }
    for (std::size_t c = 1; c < row.size(); ++c) {
      const std::string& name = t.header[c];
      if (numeric[c]) {
        rec.numeric_fields[name] =
            row[c].empty() ? std::optional<double>{}
                           : std::optional<double>{csv::parse_double(
                                 row[c], path.string() + ":" + std::to_string(line))};
      } else {
        rec.categorical_fields[name] =
            row[c].empty() ? std::optional<std::string>{}
                           : std::optional<std::string>{row[c]};
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<VisitRecord> load_visits(const std::filesystem::path& path,
                                     DiagnosticLog& log) {
  const csv::Table t = csv::read_file(path);
  std::vector<std::string> expected = {"patient_id", "day", "source"};
  for (int q = 1; q <= QuestionId::kCount; ++q)
    expected.push_back("q" + std::to_string(q));
  if (t.header != expected) {
    std::string msg = path.string() + ": unexpected columns, want patient_id,day,source,q1..q12";
    for (const auto& h : t.header)
      if (std::find(expected.begin(), expected.end(), h) == expected.end())
        msg += "; unknown column '" + h + "'";
    throw DataError(msg);
  }

  std::vector<VisitRecord> out;
  std::set<std::tuple<std::string, int, Source>> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t line = r + 2;
    VisitRecord v;
    v.patient_id = row[0];
    if (!valid_identifier(v.patient_id)) {
      log.add(path, line, "invalid patient_id '" + row[0] + "'");
      continue;
    }
    bool bad = false;
    try {
      v.day = csv::parse_int(row[1], "day");
      v.source = source_from_string(row[2]);
    } catch (const DataError& e) {
      log.add(path, line, e.what());
      continue;
    }
    if (v.day < 0) {
      log.add(path, line, "negative day " + std::to_string(v.day));
      continue;
    }
    for (int q = 0; q < QuestionId::kCount; ++q) {
      const std::string& cell = row[3 + q];
      if (cell.empty()) continue;
      int value = 0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || value < 0 || value > 4) {
        log.add(path, line, "q" + std::to_string(q + 1) + " score '" + cell +
                                "' outside {0..4}");
        bad = true;
        break;
      }
      v.scores[q] = Score(value);
    }
    if (bad) continue;
    if (!v.has_any_score()) {
      log.add(path, line, "visit has no scores");
      continue;
    }
    if (!seen.insert({v.patient_id, v.day, v.source}).second) {
      log.add(path, line, "duplicate visit (" + v.patient_id + ", day " +
                              std::to_string(v.day) + ", " + to_string(v.source) + ")");
      continue;
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<SensorSeries> load_sensors(const std::filesystem::path& path,
                                       DiagnosticLog& log,
                                       std::vector<std::string>& warnings) {
  const csv::Table t = csv::read_file(path);
  const std::vector<std::string> expected = {"patient_id", "day", "channel", "value"};
  if (t.header != expected)
    throw DataError(path.string() + ": columns must be patient_id,day,channel,value");

  // group rows in file order, then sort by day keeping file order for ties
  std::map<std::pair<std::string, std::string>, std::vector<SensorSample>> grouped;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t line = r + 2;
    if (!valid_identifier(row[0]) || !valid_identifier(row[2])) {
      log.add(path, line, "invalid patient_id or channel name");
      continue;
    }
    int day = 0;
    double value = 0;
    try {
      day = csv::parse_int(row[1], "day");
      value = csv::parse_double(row[3], "value");
    } catch (const DataError& e) {
      log.add(path, line, e.what());
      continue;
    }
    if (!std::isfinite(value)) {
      log.add(path, line, "non-finite sensor value");
      continue;
    }
    grouped[{row[0], row[2]}].push_back({day, value});
  }

  std::vector<SensorSeries> out;
  for (auto& [key, samples] : grouped) {
    std::stable_sort(samples.begin(), samples.end(),
                     [](const SensorSample& a, const SensorSample& b) {
                       return a.day < b.day;
                     });
    SensorSeries s;
    s.patient_id = key.first;
    s.channel = key.second;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (!s.samples.empty() && s.samples.back().day == samples[i].day) {
        warnings.push_back("sensors: duplicate sample " + s.patient_id + "/" +
                           s.channel + " day " + std::to_string(samples[i].day) +
                           ", keeping last");
        s.samples.back() = samples[i];
      } else {
        s.samples.push_back(samples[i]);
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

Cohort load_cohort(const std::filesystem::path& static_path,
                   const std::filesystem::path& visits_path,
                   const std::filesystem::path& sensors_path) {
  DiagnosticLog log;
  Cohort cohort;
  cohort.statics = load_statics(static_path, log);
  cohort.visits = load_visits(visits_path, log);
  cohort.series = load_sensors(sensors_path, log, cohort.warnings);
  log.raise_if_any();
  return cohort;
}

std::vector<StaticRecord> impute_static(std::vector<StaticRecord> records) {
  if (records.empty()) return records;

  std::set<std::string> numeric_names, categorical_names;
  for (const auto& r : records) {
    for (const auto& [name, _] : r.numeric_fields) numeric_names.insert(name);
    for (const auto& [name, _] : r.categorical_fields) categorical_names.insert(name);
  }

  for (const auto& name : numeric_names) {
    std::vector<double> present;
    for (const auto& r : records) {
      const auto it = r.numeric_fields.find(name);
      if (it != r.numeric_fields.end() && it->second.has_value())
        present.push_back(*it->second);
    }
    if (present.empty())
      throw DataError("static field '" + name + "' missing for every patient");
    const double med = stats::median(present);
    for (auto& r : records) {
      auto& slot = r.numeric_fields[name];
      if (!slot.has_value()) slot = med;
    }
  }

  for (const auto& name : categorical_names) {
    std::map<std::string, std::size_t> counts;
    for (const auto& r : records) {
      const auto it = r.categorical_fields.find(name);
      if (it != r.categorical_fields.end() && it->second.has_value())
        ++counts[*it->second];
    }
    if (counts.empty())
      throw DataError("static field '" + name + "' missing for every patient");
    // modal label; std::map iteration is sorted, so ties resolve to the
    // lexicographically smallest label
    std::string mode;
    std::size_t best = 0;
    for (const auto& [label, n] : counts) {
      if (n > best) {
        best = n;
        mode = label;
      }
    }
    for (auto& r : records) {
      auto& slot = r.categorical_fields[name];
      if (!slot.has_value()) slot = mode;
    }
  }
  return records;
}

StaticEncoder StaticEncoder::fit(std::span<const StaticRecord> records) {
  StaticEncoder enc;
  std::set<std::string> numeric;
  std::map<std::string, std::set<std::string>> labels;
  for (const auto& r : records) {
    for (const auto& [name, _] : r.numeric_fields) numeric.insert(name);
    for (const auto& [name, value] : r.categorical_fields)
      if (value.has_value()) labels[name].insert(*value);
  }
  enc.numeric_names_.assign(numeric.begin(), numeric.end());
  for (const auto& [name, set] : labels)
    enc.categorical_.emplace_back(name, std::vector<std::string>(set.begin(), set.end()));

  enc.columns_ = enc.numeric_names_;
  for (const auto& [name, lab] : enc.categorical_)
    for (const auto& l : lab) enc.columns_.push_back(name + "=" + l);
  return enc;
}

std::vector<double> StaticEncoder::encode(const StaticRecord& record) const {
  std::vector<double> out;
  out.reserve(columns_.size());
  for (const auto& name : numeric_names_) {
    const auto it = record.numeric_fields.find(name);
    if (it == record.numeric_fields.end() || !it->second.has_value())
      throw DataError("encode_static: patient " + record.patient_id +
                      " missing numeric field '" + name + "' (impute first)");
    out.push_back(*it->second);
  }
  for (const auto& [name, labels] : categorical_) {
    const auto it = record.categorical_fields.find(name);
    if (it == record.categorical_fields.end() || !it->second.has_value())
      throw DataError("encode_static: patient " + record.patient_id +
                      " missing categorical field '" + name + "' (impute first)");
    for (const auto& l : labels) out.push_back(*it->second == l ? 1.0 : 0.0);
  }
  return out;
}

void write_static_csv(const std::filesystem::path& path,
                      std::span<const StaticRecord> records) {
  std::set<std::string> numeric, categorical;
  for (const auto& r : records) {
    for (const auto& [name, _] : r.numeric_fields) numeric.insert(name);
    for (const auto& [name, _] : r.categorical_fields) categorical.insert(name);
  }
  std::vector<std::string> header = {"patient_id"};
  header.insert(header.end(), numeric.begin(), numeric.end());
  header.insert(header.end(), categorical.begin(), categorical.end());

  std::vector<std::vector<std::string>> rows;
  for (const auto& r : records) {
    std::vector<std::string> row = {r.patient_id};
    for (const auto& name : numeric) {
      const auto it = r.numeric_fields.find(name);
      row.push_back(it != r.numeric_fields.end() && it->second.has_value()
                        ? csv::format_double(*it->second)
                        : "");
    }
    for (const auto& name : categorical) {
      const auto it = r.categorical_fields.find(name);
      row.push_back(it != r.categorical_fields.end() && it->second.has_value()
                        ? *it->second
                        : "");
    }
    rows.push_back(std::move(row));
  }
  csv::write_file(path, header, rows);
}

void write_visits_csv(const std::filesystem::path& path,
                      std::span<const VisitRecord> visits) {
  std::vector<std::string> header = {"patient_id", "day", "source"};
  for (int q = 1; q <= QuestionId::kCount; ++q)
    header.push_back("q" + std::to_string(q));
  std::vector<std::vector<std::string>> rows;
  for (const auto& v : visits) {
    std::vector<std::string> row = {v.patient_id, csv::format_int(v.day),
                                    to_string(v.source)};
    for (const auto& s : v.scores)
      row.push_back(s.has_value() ? std::to_string(s->value()) : "");
    rows.push_back(std::move(row));
  }
  csv::write_file(path, header, rows);
}

void write_sensors_csv(const std::filesystem::path& path,
                       std::span<const SensorSeries> series) {
  const std::vector<std::string> header = {"patient_id", "day", "channel", "value"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : series)
    for (const auto& sample : s.samples)
      rows.push_back({s.patient_id, csv::format_int(sample.day), s.channel,
                      csv::format_double(sample.value)});
  csv::write_file(path, header, rows);
}

}  // namespace alsprog
