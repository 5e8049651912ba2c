#pragma once

#include <span>
#include <string>
#include <vector>

namespace alsprog {

// Dense row-major matrix for the numeric core.
struct DenseMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<double> data;

  double& at(std::size_t r, std::size_t c) { return data[r * n_cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * n_cols + c]; }
};

// Linear model fit by cyclic coordinate descent on standardized inputs.
// Objective: (1/2n)||y - b0 - X beta||^2 + lambda (alpha ||beta||_1 +
// (1-alpha)/2 ||beta||^2); the 1/(2n) convention keeps lambda grids
// independent of the sample size. Coefficients live on the standardized
// scale.
struct ElasticNetModel {
  std::vector<std::string> feature_names;
  std::vector<double> feature_means;
  std::vector<double> feature_stds;  // population form; 0 marks a constant column
  std::vector<double> coefficients;
  double target_mean = 0;
  double intercept = 0;  // original-scale intercept
  double lambda = 0;
  double alpha = 1;
  int iterations = 0;
  bool converged = false;
};

struct FitOptions {
  double lambda = 0;
  double alpha = 1;
  double tol = 1e-6;      // max absolute coefficient change per sweep
  int max_iter = 10000;   // sweep limit
  bool track_objective = false;
};

// sign(z) * max(|z| - gamma, 0)
double soft_threshold(double z, double gamma);

// Fits the model. Zero-variance columns keep a forced zero coefficient
// (fold subsetting can produce them). `warm` seeds the coefficients when
// its shape matches, which is how the descending-lambda path reuses work.
// `objective_trace`, when requested, records the objective after each
// sweep.
ElasticNetModel fit(const DenseMatrix& x, std::span<const double> y,
                    std::span<const std::string> feature_names,
                    const FitOptions& options,
                    const ElasticNetModel* warm = nullptr,
                    std::vector<double>* objective_trace = nullptr);

// Raw predictions (rounding is core::postprocess). Columns must match the
// model's feature names exactly.
std::vector<double> predict(const ElasticNetModel& model, const DenseMatrix& x,
                            std::span<const std::string> columns);

struct ImportanceEntry {
  std::string feature;
  double importance = 0;  // |standardized coefficient|
  int rank = 0;
};

struct ImportanceReport {
  std::vector<ImportanceEntry> entries;  // rank order
};

// Features ranked by |standardized coefficient| descending, ties by name.
ImportanceReport importance(const ElasticNetModel& model);

// Self-describing text document; exact round-trip via shortest-decimal
// rendering.
std::string serialize_model(const ElasticNetModel& model);
ElasticNetModel deserialize_model(const std::string& text);

}  // namespace alsprog
