#include "alsprog/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "alsprog/csv.hpp"
#include "alsprog/error.hpp"

namespace alsprog {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    return csv::parse_double(v, key);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

int to_int(const std::string& key, const std::string& v) {
  try {
    return csv::parse_int(v, key);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError(key + ": expected true|false, got '" + v + "'");
}

void apply(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "input_dir") cfg.input_dir = value;
  else if (key == "out_dir") cfg.out_dir = value;
  else if (key == "tail_max_gap_days") cfg.tail_max_gap_days = to_int(key, value);
  else if (key == "augment") cfg.augment = to_bool(key, value);
  else if (key == "augment_alpha") cfg.augment_alpha = to_double(key, value);
  else if (key == "horizon_min_days") cfg.horizon_min_days = to_int(key, value);
  else if (key == "feature_mode") cfg.feature_mode = feature_mode_from_string(value);
  else if (key == "max_missing_frac") cfg.max_missing_frac = to_double(key, value);
  else if (key == "min_variance") cfg.min_variance = to_double(key, value);
  else if (key == "selection_mode")
    cfg.selection_mode = selection_mode_from_string(value);
  else if (key == "fdr_level") cfg.fdr_level = to_double(key, value);
  else if (key == "top_k") cfg.top_k = to_int(key, value);
  else if (key == "outer_k") cfg.outer_k = to_int(key, value);
  else if (key == "inner_k") cfg.inner_k = to_int(key, value);
  else if (key == "lambda_min") cfg.lambda_min = to_double(key, value);
  else if (key == "lambda_max") cfg.lambda_max = to_double(key, value);
  else if (key == "lambda_count") cfg.lambda_count = to_int(key, value);
  else if (key == "en_alpha_min") cfg.en_alpha_min = to_double(key, value);
  else if (key == "en_alpha_max") cfg.en_alpha_max = to_double(key, value);
  else if (key == "en_alpha_count") cfg.en_alpha_count = to_int(key, value);
  else if (key == "solver_tol") cfg.solver_tol = to_double(key, value);
  else if (key == "solver_max_iter") cfg.solver_max_iter = to_int(key, value);
  else if (key == "metrics") {
    if (value == "rounded") cfg.rounded_metrics = true;
    else if (value == "raw") cfg.rounded_metrics = false;
    else throw ConfigError("metrics: expected rounded|raw, got '" + value + "'");
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
  } else if (key == "threads") cfg.threads = to_int(key, value);
  else if (key == "holdout_frac") cfg.holdout_frac = to_double(key, value);
  else if (key == "synth") cfg.synth = to_bool(key, value);
  else if (key == "synth_preset") cfg.synth_preset = value;
  else if (key == "synth_patients") cfg.synth_patients = to_int(key, value);
  else if (key == "synth_self_fraction")
    cfg.synth_self_fraction = to_double(key, value);
  else if (key == "synth_disagreement")
    cfg.synth_disagreement = to_double(key, value);
  else
    throw ConfigError("unknown config key '" + key + "'");
}

void validate(const PipelineConfig& cfg) {
  if (cfg.tail_max_gap_days < 0) throw ConfigError("tail_max_gap_days must be >= 0");
  if (cfg.horizon_min_days < 1) throw ConfigError("horizon_min_days must be >= 1");
  if (cfg.augment_alpha <= 0 || cfg.augment_alpha >= 1)
    throw ConfigError("augment_alpha must be in (0,1)");
  if (cfg.max_missing_frac < 0 || cfg.max_missing_frac > 1)
    throw ConfigError("max_missing_frac must be in [0,1]");
  if (cfg.min_variance < 0) throw ConfigError("min_variance must be >= 0");
  if (cfg.fdr_level <= 0 || cfg.fdr_level > 1)
    throw ConfigError("fdr_level must be in (0,1]");
  if (cfg.top_k < 1) throw ConfigError("top_k must be >= 1");
  if (cfg.lambda_min <= 0 || cfg.lambda_max < cfg.lambda_min)
    throw ConfigError("lambda grid requires 0 < lambda_min <= lambda_max");
  if (cfg.lambda_count < 1) throw ConfigError("lambda_count must be >= 1");
  if (cfg.en_alpha_min < 0 || cfg.en_alpha_max > 1 ||
      cfg.en_alpha_max < cfg.en_alpha_min)
    throw ConfigError("en_alpha grid must lie inside [0,1]");
  if (cfg.en_alpha_count < 1) throw ConfigError("en_alpha_count must be >= 1");
  if (cfg.solver_tol <= 0) throw ConfigError("solver_tol must be > 0");
  if (cfg.solver_max_iter < 1) throw ConfigError("solver_max_iter must be >= 1");
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  if (cfg.holdout_frac < 0 || cfg.holdout_frac >= 1)
    throw ConfigError("holdout_frac must be in [0,1)");
  if (cfg.synth_patients < 1) throw ConfigError("synth_patients must be >= 1");
}

}  // namespace

PipelineConfig PipelineConfig::load(
    const std::filesystem::path& file,
    const std::map<std::string, std::string>& overrides) {
  PipelineConfig cfg;
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(file.string() + ":" + std::to_string(lineno) +
                        ": expected key = value");
    apply(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  for (const auto& [key, value] : overrides) apply(cfg, key, value);
  validate(cfg);
  return cfg;
}

PipelineConfig PipelineConfig::from_overrides(
    const std::map<std::string, std::string>& overrides) {
  PipelineConfig cfg;
  for (const auto& [key, value] : overrides) apply(cfg, key, value);
  validate(cfg);
  return cfg;
}

std::string PipelineConfig::canonical() const {
  std::ostringstream out;
  out << "input_dir = " << input_dir.string() << "\n";
  out << "out_dir = " << out_dir.string() << "\n";
  out << "tail_max_gap_days = " << tail_max_gap_days << "\n";
  out << "augment = " << (augment ? "true" : "false") << "\n";
  out << "augment_alpha = " << csv::format_double(augment_alpha) << "\n";
  out << "horizon_min_days = " << horizon_min_days << "\n";
  out << "feature_mode = " << to_string(feature_mode) << "\n";
  out << "max_missing_frac = " << csv::format_double(max_missing_frac) << "\n";
  out << "min_variance = " << csv::format_double(min_variance) << "\n";
  out << "selection_mode = " << to_string(selection_mode) << "\n";
  out << "fdr_level = " << csv::format_double(fdr_level) << "\n";
  out << "top_k = " << top_k << "\n";
  out << "outer_k = " << outer_k << "\n";
  out << "inner_k = " << inner_k << "\n";
  out << "lambda_min = " << csv::format_double(lambda_min) << "\n";
  out << "lambda_max = " << csv::format_double(lambda_max) << "\n";
  out << "lambda_count = " << lambda_count << "\n";
  out << "en_alpha_min = " << csv::format_double(en_alpha_min) << "\n";
  out << "en_alpha_max = " << csv::format_double(en_alpha_max) << "\n";
  out << "en_alpha_count = " << en_alpha_count << "\n";
  out << "solver_tol = " << csv::format_double(solver_tol) << "\n";
  out << "solver_max_iter = " << solver_max_iter << "\n";
  out << "metrics = " << (rounded_metrics ? "rounded" : "raw") << "\n";
  out << "seed = " << seed << "\n";
  out << "holdout_frac = " << csv::format_double(holdout_frac) << "\n";
  out << "synth = " << (synth ? "true" : "false") << "\n";
  out << "synth_preset = " << synth_preset << "\n";
  out << "synth_patients = " << synth_patients << "\n";
  out << "synth_self_fraction = " << csv::format_double(synth_self_fraction) << "\n";
  out << "synth_disagreement = " << csv::format_double(synth_disagreement) << "\n";
  // threads intentionally omitted: it must never change any output byte
  return out.str();
}

std::uint64_t PipelineConfig::hash() const {
  const std::string text = canonical();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

GridConfig PipelineConfig::grid() const {
  GridConfig g;
  if (lambda_count == 1) {
    g.lambdas.push_back(lambda_min);
  } else {
    const double lo = std::log10(lambda_min), hi = std::log10(lambda_max);
    for (int i = 0; i < lambda_count; ++i)
      g.lambdas.push_back(std::pow(10.0, lo + (hi - lo) * i / (lambda_count - 1)));
  }
  if (en_alpha_count == 1) {
    g.en_alphas.push_back(en_alpha_min);
  } else {
    for (int i = 0; i < en_alpha_count; ++i)
      g.en_alphas.push_back(en_alpha_min + (en_alpha_max - en_alpha_min) * i /
                                               (en_alpha_count - 1));
  }
  return g;
}

HarnessConfig PipelineConfig::harness(int effective_threads) const {
  HarnessConfig h;
  h.outer_k = outer_k;
  h.inner_k = inner_k;
  h.seed = seed;
  h.grid = grid();
  h.prune = prune();
  h.selection = selection();
  h.solver_tol = solver_tol;
  h.solver_max_iter = solver_max_iter;
  h.rounded_metrics = rounded_metrics;
  h.threads = effective_threads;
  return h;
}

PruneConfig PipelineConfig::prune() const {
  return PruneConfig{max_missing_frac, min_variance};
}

SelectionConfig PipelineConfig::selection() const {
  return SelectionConfig{selection_mode, fdr_level, top_k};
}

}  // namespace alsprog
