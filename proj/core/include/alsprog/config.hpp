#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "alsprog/featurize.hpp"
#include "alsprog/harness.hpp"

namespace alsprog {

// Pipeline configuration: plain-text "key = value" file with '#' comments;
// command-line overrides win over file values; unknown keys are rejected.
struct PipelineConfig {
  std::filesystem::path input_dir = ".";
  std::filesystem::path out_dir = "out";

  int tail_max_gap_days = 60;

  bool augment = false;
  double augment_alpha = 0.05;
  int horizon_min_days = 90;

  FeatureMode feature_mode = FeatureMode::catalog;
  double max_missing_frac = 0.3;
  double min_variance = 1e-12;
  SelectionMode selection_mode = SelectionMode::keep_all;
  double fdr_level = 0.05;
  int top_k = 10;

  int outer_k = 10;
  int inner_k = 5;
  double lambda_min = 1e-4;
  double lambda_max = 10.0;
  int lambda_count = 20;
  double en_alpha_min = 0.1;
  double en_alpha_max = 1.0;
  int en_alpha_count = 10;
  double solver_tol = 1e-6;
  int solver_max_iter = 10000;
  bool rounded_metrics = true;  // key: metrics = rounded | raw

  std::uint64_t seed = 0;
  int threads = 1;
  double holdout_frac = 0.0;

  bool synth = false;
  std::string synth_preset = "planted";
  int synth_patients = 60;
  double synth_self_fraction = 0.0;
  double synth_disagreement = 0.0;

  static PipelineConfig load(const std::filesystem::path& file,
                             const std::map<std::string, std::string>& overrides);
  static PipelineConfig from_overrides(
      const std::map<std::string, std::string>& overrides);

  // Canonical text rendering of every key; hashing it gives the config
  // fingerprint recorded in run manifests.
  std::string canonical() const;
  std::uint64_t hash() const;

  GridConfig grid() const;
  HarnessConfig harness(int effective_threads) const;
  PruneConfig prune() const;
  SelectionConfig selection() const;
};

}  // namespace alsprog
