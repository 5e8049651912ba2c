#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alsprog/core.hpp"
#include "alsprog/featurize.hpp"
#include "alsprog/solver.hpp"
#include "alsprog/sync.hpp"

namespace alsprog {

struct InnerFold {
  std::vector<std::string> train_patients;
  std::vector<std::string> val_patients;
};

struct OuterFold {
  std::vector<std::string> test_patients;
  std::vector<std::string> trainval_patients;
  std::vector<InnerFold> inner;
};

// Grouped nested-CV plan: every patient's windows live entirely on one
// side of every split; outer test sets are disjoint and cover the cohort.
struct FoldPlan {
  std::uint64_t seed = 0;
  int outer_k = 10;
  int inner_k = 5;
  std::vector<OuterFold> outer;
};

FoldPlan plan_folds(std::vector<std::string> patient_ids, int outer_k,
                    int inner_k, std::uint64_t seed);

// Carry-forward baseline.
double naive_predict(const ObservationWindow& window);

enum class ModelKind { naive, elasticnet, lasso };
enum class DataMode { clinical, augmented };

std::string to_string(ModelKind k);
std::string to_string(DataMode d);

struct Candidate {
  ModelKind kind = ModelKind::naive;
  FeatureMode featureset = FeatureMode::median;
  DataMode data = DataMode::clinical;

  std::string id() const;
};

struct GridConfig {
  std::vector<double> lambdas;    // default: 20 log-spaced in [1e-4, 10]
  std::vector<double> en_alphas;  // default: 0.1 .. 1.0 step 0.1

  static GridConfig defaults();
};

struct HarnessConfig {
  int outer_k = 10;
  int inner_k = 5;
  std::uint64_t seed = 0;
  GridConfig grid = GridConfig::defaults();
  PruneConfig prune;
  SelectionConfig selection;
  double solver_tol = 1e-6;
  int solver_max_iter = 10000;
  bool rounded_metrics = true;  // postprocess predictions before scoring
  int threads = 1;
};

struct GridCellStats {
  double lambda = 0;
  double alpha = 1;
  double mean_val_rmse = 0;
  std::size_t n_folds = 0;
  bool valid = false;
};

struct GridSearchResult {
  std::vector<GridCellStats> cells;
  std::optional<std::size_t> best;  // min mean RMSE; ties -> larger lambda, then alpha
};

struct CandidateResult {
  std::string candidate_id;
  bool evaluable = false;
  double mean_val_rmse = 0;  // pooled over all outer x inner folds, best cell
  double best_lambda = 0;
  double best_alpha = 0;
  std::vector<double> outer_test_rmse;  // NaN where not evaluable
};

struct QuestionSelection {
  int question = 0;
  std::vector<CandidateResult> candidates;
  std::string winner;
};

struct SelectionReport {
  std::vector<QuestionSelection> questions;
};

// Per-question predictor packaged with its feature pipeline so that
// serialization captures everything needed to score new windows.
struct QuestionPredictor {
  int question = 0;
  std::string candidate_id = "naive";
  bool is_naive = true;
  ElasticNetModel model;               // when !is_naive
  std::vector<double> impute_medians;  // aligned with model.feature_names
};

struct TrainedBundle {
  std::vector<QuestionPredictor> predictors;  // one per question
  // best linear candidate refit on all data, for importance reporting even
  // where naive wins selection
  std::vector<std::optional<QuestionPredictor>> report_models;
  SelectionReport report;
  std::vector<std::string> trained_patients;
};

// Evaluates {naive, elasticnet, lasso} x featureset x data-mode candidates
// per question under one fold plan, picks winners by mean validation RMSE
// (ties -> naive, then lexicographic id), and refits each winner on all
// data with the pooled-best hyperparameters. Validation and test rows
// always come from the clinical matrix so candidates stay comparable;
// the augmented matrix contributes training rows only.
TrainedBundle train_bundle(const FeatureMatrix& clinical,
                           const FeatureMatrix* augmented,
                           const FoldPlan& plan, const HarnessConfig& cfg);

// Raw prediction for one feature row (column order of `m`); NaN cells are
// imputed with the stored medians. A model feature absent from `m` is an
// error.
double predict_row(const QuestionPredictor& predictor, const FeatureMatrix& m,
                   std::size_t row);

struct EvalPrediction {
  RowKey key;
  double raw = 0;
  int rounded = 0;
  int truth = 0;
};

struct EvalOutput {
  std::vector<std::pair<int, MetricReport>> per_question;
  MetricReport overall;
  std::vector<EvalPrediction> predictions;
};

// Scores the bundle on a clinical feature matrix. Predictions are
// post-processed before scoring unless rounded_metrics is false.
EvalOutput evaluate_bundle(const TrainedBundle& bundle, const FeatureMatrix& eval,
                           bool rounded_metrics,
                           std::vector<std::string>* warnings = nullptr);

// Bundle directory IO: one predictor document per question plus
// selection_report.csv and bundle_meta.txt.
void write_bundle(const std::filesystem::path& dir, const TrainedBundle& bundle);
TrainedBundle read_bundle(const std::filesystem::path& dir);

std::string serialize_predictor(const QuestionPredictor& p);
QuestionPredictor deserialize_predictor(const std::string& text);

}  // namespace alsprog
