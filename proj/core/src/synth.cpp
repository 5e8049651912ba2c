#include "alsprog/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "alsprog/csv.hpp"
#include "alsprog/error.hpp"
#include "alsprog/rng.hpp"

namespace alsprog {

namespace {

std::string patient_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "p%03d", i);
  return buf;
}

std::string channel_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "ch%02d", i);
  return buf;
}

double round1(double v) { return std::round(v * 10.0) / 10.0; }

struct PatientDraw {
  std::string id;
  double age = 0;
  double fvc = 0;
  std::string sex;
  std::string onset_site;
  std::vector<int> visit_days;
  // per-channel daily samples (day -> value), shared day grid with gaps
  std::vector<std::map<int, double>> channel_samples;
};

int clip_score(double v) {
  double r = std::round(v);
  if (r < 0) r = 0;
  if (r > 4) r = 4;
  return static_cast<int>(r);
}

double window_channel_mean(const PatientDraw& p, int channel, int start, int end) {
  const auto& samples = p.channel_samples[channel];
  double sum = 0;
  std::size_t n = 0;
  for (auto it = samples.lower_bound(start); it != samples.end() && it->first < end;
       ++it) {
    sum += it->second;
    ++n;
  }
  if (n == 0) return 0.0;
  return sum / static_cast<double>(n);
}

}  // namespace

SynthConfig synth_preset(const std::string& name, int n_patients,
                         std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_patients = n_patients;
  cfg.seed = seed;
  if (name == "persistence") {
    cfg.signal = {SignalTerm{SignalTerm::Kind::previous_value, 1.0, 0, 0, ""}};
    cfg.noise_std = 0;
  } else if (name == "planted") {
    cfg.visits_min = 4;
    cfg.visits_max = 6;
    cfg.signal = {SignalTerm{SignalTerm::Kind::previous_value, 1.0, 0, 0, ""},
                  SignalTerm{SignalTerm::Kind::channel_below, -1.0, 0, 5.0, ""}};
    cfg.noise_std = 0.3;
  } else if (name == "recovery") {
    cfg.signal = {SignalTerm{SignalTerm::Kind::previous_value, 1.0, 0, 0, ""},
                  SignalTerm{SignalTerm::Kind::channel_mean, 1.0, 1, 0, ""}};
    cfg.noise_std = 0;
  } else {
    throw ConfigError("unknown synth preset '" + name +
                      "', expected persistence|planted|recovery");
  }
  return cfg;
}

SynthOutput generate(const SynthConfig& config, const std::filesystem::path& out_dir) {
  if (config.n_patients <= 0 || config.visits_min < 2 ||
      config.visits_max < config.visits_min || config.n_channels < 2)
    throw ConfigError("synth: need n_patients > 0, visits_min >= 2 <= visits_max, "
                      "n_channels >= 2");
  if (config.noise_std < 0) throw ConfigError("synth: negative noise_std");

  const Rng master(config.seed);
  std::vector<PatientDraw> patients;
  patients.reserve(config.n_patients);

  for (int i = 0; i < config.n_patients; ++i) {
    PatientDraw p;
    p.id = patient_name(i);
    Rng rng = master.substream("patient/" + p.id);

    p.age = round1(rng.uniform(40.0, 75.0));
    p.fvc = round1(rng.uniform(45.0, 110.0));
    p.sex = rng.uniform() < 0.5 ? "F" : "M";
    p.onset_site = rng.uniform() < 0.3 ? "bulbar" : "limb";

    const int n_visits = rng.uniform_int(config.visits_min, config.visits_max);
    int day = rng.uniform_int(300, 600);
    for (int v = 0; v < n_visits; ++v) {
      p.visit_days.push_back(day);
      const double gap =
          rng.normal(config.visit_gap_mean, config.visit_gap_jitter);
      day += std::max(30, static_cast<int>(std::lround(gap)));
    }

    const int sensor_start = p.visit_days.front() - 30;
    const int sensor_end = p.visit_days.back();
    const int span = sensor_end - sensor_start;

    // channel 0: linear health decline crossing its threshold mid-series
    // for most patients
    const double h0 = rng.uniform(6.5, 9.5);
    const double cross_frac = rng.uniform(0.4, 1.3);
    const double rate = (h0 - 5.0) / (cross_frac * static_cast<double>(span));

    // channel 1: step 0 -> -1 at one of the patient's visit days, so the
    // transition never straddles a window
    const int switch_idx = rng.uniform_int(1, std::max(1, n_visits - 1));
    const int switch_day = p.visit_days[switch_idx];

    p.channel_samples.resize(config.n_channels);
    Rng walk = rng.substream("sensors");
    std::vector<double> ar_state(config.n_channels, 0.0);
    for (int t = sensor_start; t <= sensor_end; ++t) {
      for (int c = 0; c < config.n_channels; ++c) {
        if (walk.uniform() < config.sensor_gap_frac) continue;
        double value = 0;
        if (c == 0) {
          value = h0 - rate * static_cast<double>(t - sensor_start) +
                  walk.normal(0, 0.3);
        } else if (c == 1) {
          value = (t >= switch_day ? -1.0 : 0.0) + walk.normal(0, 0.01);
        } else {
          ar_state[c] = 0.8 * ar_state[c] + walk.normal(0, 1.0);
          value = ar_state[c];
        }
        p.channel_samples[c][t] = value;
      }
    }
    patients.push_back(std::move(p));
  }

  // score trajectories
  std::vector<std::vector<std::array<int, 12>>> scores(patients.size());
  for (std::size_t i = 0; i < patients.size(); ++i) {
    const PatientDraw& p = patients[i];
    Rng rng = master.substream("scores/" + p.id);
    scores[i].resize(p.visit_days.size());
    for (int q = 0; q < 12; ++q) {
      int current = rng.uniform() < 0.5 ? 4 : 3;
      scores[i][0][q] = current;
      for (std::size_t v = 1; v < p.visit_days.size(); ++v) {
        const int start = p.visit_days[v - 1];
        const int end = p.visit_days[v];
        double latent = 0;
        for (const SignalTerm& term : config.signal) {
          switch (term.kind) {
            case SignalTerm::Kind::previous_value:
              latent += term.coef * current;
              break;
            case SignalTerm::Kind::channel_mean:
              latent += term.coef * window_channel_mean(p, term.channel, start, end);
              break;
            case SignalTerm::Kind::channel_below:
              latent += term.coef *
                        (window_channel_mean(p, term.channel, start, end) <
                                 term.threshold
                             ? 1.0
                             : 0.0);
              break;
            case SignalTerm::Kind::static_field:
              latent += term.coef * (term.field == "age_at_diagnosis" ? p.age : p.fvc);
              break;
          }
        }
        if (config.noise_std > 0) latent += rng.normal(0, config.noise_std);
        current = clip_score(latent);
        scores[i][v][q] = current;
      }
    }
  }

  // write static.csv
  {
    std::vector<std::string> header = {"patient_id", "age_at_diagnosis", "fvc",
                                       "onset_site", "sex"};
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : patients)
      rows.push_back({p.id, csv::format_double(p.age), csv::format_double(p.fvc),
                      p.onset_site, p.sex});
    csv::write_file(out_dir / "static.csv", header, rows);
  }

  // write visits.csv: clinician rows, then self-assessment rows
  {
    std::vector<std::string> header = {"patient_id", "day", "source"};
    for (int q = 1; q <= 12; ++q) header.push_back("q" + std::to_string(q));
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < patients.size(); ++i) {
      const PatientDraw& p = patients[i];
      for (std::size_t v = 0; v < p.visit_days.size(); ++v) {
        std::vector<std::string> row = {p.id, csv::format_int(p.visit_days[v]),
                                        "clinician"};
        for (int q = 0; q < 12; ++q) row.push_back(std::to_string(scores[i][v][q]));
        rows.push_back(std::move(row));
      }
    }
    for (std::size_t i = 0; i < patients.size(); ++i) {
      const PatientDraw& p = patients[i];
      Rng rng = master.substream("self/" + p.id);
      if (rng.uniform() >= config.self_fraction) continue;
      const bool disagree = rng.uniform() < config.disagreement_fraction;
      // carry-forward score process sampled at the self-assessment days
      auto score_at = [&](int day, int q) {
        std::size_t idx = 0;
        for (std::size_t v = 0; v < p.visit_days.size(); ++v)
          if (p.visit_days[v] <= day) idx = v;
        return scores[i][idx][q];
      };
      int day = p.visit_days.front() +
                std::max(5, static_cast<int>(std::lround(
                                rng.normal(config.self_gap_mean, 5.0))));
      std::set<int> clinician_days(p.visit_days.begin(), p.visit_days.end());
      while (day < p.visit_days.back()) {
        if (!clinician_days.count(day)) {
          std::vector<std::string> row = {p.id, csv::format_int(day), "self"};
          for (int q = 0; q < 12; ++q) {
            int s = score_at(day, q);
            if (disagree) s = 4 - s;
            row.push_back(std::to_string(s));
          }
          rows.push_back(std::move(row));
        }
        day += std::max(5, static_cast<int>(std::lround(
                               rng.normal(config.self_gap_mean, 5.0))));
      }
    }
    csv::write_file(out_dir / "visits.csv", header, rows);
  }

  // write sensors.csv (long form, per channel per day)
  {
    const std::vector<std::string> header = {"patient_id", "day", "channel", "value"};
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : patients) {
      for (int c = 0; c < config.n_channels; ++c) {
        const std::string ch = channel_name(c);
        for (const auto& [day, value] : p.channel_samples[c])
          rows.push_back({p.id, csv::format_int(day), ch, csv::format_double(value)});
      }
    }
    csv::write_file(out_dir / "sensors.csv", header, rows);
  }

  // ground-truth manifest
  {
    nlohmann::json j;
    j["seed"] = config.seed;
    j["n_patients"] = config.n_patients;
    j["n_channels"] = config.n_channels;
    j["noise_std"] = config.noise_std;
    j["self_fraction"] = config.self_fraction;
    j["disagreement_fraction"] = config.disagreement_fraction;
    nlohmann::json terms = nlohmann::json::array();
    for (const SignalTerm& t : config.signal) {
      nlohmann::json jt;
      switch (t.kind) {
        case SignalTerm::Kind::previous_value:
          jt["kind"] = "previous_value";
          break;
        case SignalTerm::Kind::channel_mean:
          jt["kind"] = "channel_mean";
          jt["channel"] = channel_name(t.channel);
          break;
        case SignalTerm::Kind::channel_below:
          jt["kind"] = "channel_below";
          jt["channel"] = channel_name(t.channel);
          jt["threshold"] = t.threshold;
          break;
        case SignalTerm::Kind::static_field:
          jt["kind"] = "static_field";
          jt["field"] = t.field;
          break;
      }
      jt["coef"] = t.coef;
      terms.push_back(jt);
    }
    j["signal"] = terms;
    csv::write_text_atomic(out_dir / "manifest.json", j.dump(2) + "\n");
  }

  return SynthOutput{out_dir / "static.csv", out_dir / "visits.csv",
                     out_dir / "sensors.csv", out_dir / "manifest.json"};
}

}  // namespace alsprog
