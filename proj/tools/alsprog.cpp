// alsprog - ALSFRS-R progression prediction pipeline CLI.
//
// Subcommands mirror the pipeline stages; each consumes the persisted
// artifacts of its predecessors under out_dir, so stages can be re-run
// independently of the in-memory `pipeline` command.

#include <cstdio>
#include <exception>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "alsprog/config.hpp"
#include "alsprog/error.hpp"
#include "alsprog/pipeline.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> sets;  // key=value overrides
  std::map<std::string, std::string> direct;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config_file, "configuration file (key = value)");
  cmd->add_option("-s,--set", opts.sets, "override a config key, e.g. --set seed=42")
      ->take_all();
  // frequent keys as first-class flags
  static const char* keys[] = {"input_dir", "out_dir",  "seed",
                               "threads",   "metrics",  "feature_mode",
                               "holdout_frac"};
  for (const char* key : keys) {
    cmd->add_option_function<std::string>(
        std::string("--") + key,
        [&opts, key](const std::string& v) { opts.direct[key] = v; });
  }
}

alsprog::PipelineConfig build_config(const CommonOptions& opts) {
  std::map<std::string, std::string> overrides;
  for (const auto& kv : opts.sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw alsprog::ConfigError("--set expects key=value, got '" + kv + "'");
    overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  for (const auto& [k, v] : opts.direct) overrides[k] = v;
  if (!opts.config_file.empty())
    return alsprog::PipelineConfig::load(opts.config_file, overrides);
  return alsprog::PipelineConfig::from_overrides(overrides);
}

int dispatch(const std::string& stage, const CommonOptions& opts) {
  const alsprog::PipelineConfig cfg = build_config(opts);
  alsprog::StageResult result;
  if (stage == "synth") result = alsprog::run_synth(cfg);
  else if (stage == "ingest") result = alsprog::run_ingest(cfg);
  else if (stage == "align") result = alsprog::run_align(cfg);
  else if (stage == "augment") result = alsprog::run_augment(cfg);
  else if (stage == "extract") result = alsprog::run_extract(cfg);
  else if (stage == "select-features") result = alsprog::run_select_features(cfg);
  else if (stage == "train") result = alsprog::run_train(cfg);
  else if (stage == "evaluate") result = alsprog::run_evaluate(cfg);
  else if (stage == "predict") result = alsprog::run_predict(cfg);
  else if (stage == "report") result = alsprog::run_report(cfg);
  else if (stage == "pipeline") result = alsprog::run_pipeline(cfg);
  else throw alsprog::ConfigError("unknown stage " + stage);

  for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  for (const auto& a : result.artifacts) std::printf("wrote %s\n", a.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ALSFRS-R progression prediction pipeline"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> stages = {
      {"synth", "generate a seeded synthetic cohort"},
      {"ingest", "parse and validate the input tables, impute statics"},
      {"align", "synchronize clinical visits with the sensor record"},
      {"augment", "decide self-assessment merges per patient and question"},
      {"extract", "window the sensor series and build the feature table"},
      {"select-features", "Spearman relevance screen with FDR adjustment"},
      {"train", "nested grouped CV, grid search and per-question selection"},
      {"evaluate", "score a trained bundle, RMSE/MAE per question"},
      {"predict", "emit predictions for a feature table"},
      {"report", "feature importance per question"},
      {"pipeline", "run every stage from one config"},
  };

  std::map<std::string, CommonOptions> options;
  for (const auto& [name, desc] : stages)
    add_common(app.add_subcommand(name, desc), options[name]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    return dispatch(stage, options[stage]);
  } catch (const alsprog::ConfigError& e) {
    std::fprintf(stderr, "error[config]: %s\n", e.what());
    return kExitUsage;
  } catch (const alsprog::DataError& e) {
    std::fprintf(stderr, "error[data]: %s\n", e.what());
    return kExitData;
  } catch (const alsprog::NumericError& e) {
    std::fprintf(stderr, "error[numeric]: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error[internal]: %s\n", e.what());
    return kExitNumeric;
  }
}
