#include "alsprog/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "alsprog/csv.hpp"
#include "alsprog/error.hpp"

namespace alsprog {

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

ElasticNetModel fit(const DenseMatrix& x, std::span<const double> y,
                    std::span<const std::string> feature_names,
                    const FitOptions& options, const ElasticNetModel* warm,
                    std::vector<double>* objective_trace) {
  const std::size_t n = x.n_rows;
  const std::size_t p = x.n_cols;
  if (n < 2) throw NumericError("fit: need at least 2 rows");
  if (y.size() != n) throw NumericError("fit: y length mismatch");
  if (feature_names.size() != p) throw NumericError("fit: name count mismatch");
  if (options.lambda < 0) throw NumericError("fit: lambda must be >= 0");
  if (options.alpha < 0 || options.alpha > 1)
    throw NumericError("fit: alpha must be in [0,1]");
  for (const double v : x.data)
    if (!std::isfinite(v)) throw NumericError("fit: non-finite value in X");
  for (const double v : y)
    if (!std::isfinite(v)) throw NumericError("fit: non-finite value in y");

  ElasticNetModel model;
  model.feature_names.assign(feature_names.begin(), feature_names.end());
  model.lambda = options.lambda;
  model.alpha = options.alpha;

  model.feature_means.assign(p, 0.0);
  model.feature_stds.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double m = 0;
    for (std::size_t i = 0; i < n; ++i) m += x.at(i, j);
    m /= static_cast<double>(n);
    double v = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x.at(i, j) - m;
      v += d * d;
    }
    model.feature_means[j] = m;
    model.feature_stds[j] = std::sqrt(v / static_cast<double>(n));
  }

  double ymean = 0;
  for (const double v : y) ymean += v;
  ymean /= static_cast<double>(n);
  model.target_mean = ymean;

  // standardized design; constant columns become all-zero and stay at
  // coefficient zero through every update
  DenseMatrix z;
  z.n_rows = n;
  z.n_cols = p;
  z.data.assign(n * p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    const double s = model.feature_stds[j];
    if (s == 0) continue;
    for (std::size_t i = 0; i < n; ++i)
      z.at(i, j) = (x.at(i, j) - model.feature_means[j]) / s;
  }

  std::vector<double> beta(p, 0.0);
  if (warm && warm->coefficients.size() == p &&
      warm->feature_names == model.feature_names) {
    beta = warm->coefficients;
    for (std::size_t j = 0; j < p; ++j)
      if (model.feature_stds[j] == 0) beta[j] = 0.0;
  }

  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) {
    double fitted = 0;
    for (std::size_t j = 0; j < p; ++j)
      if (beta[j] != 0) fitted += z.at(i, j) * beta[j];
    residual[i] = (y[i] - ymean) - fitted;
  }

  const double lambda = options.lambda;
  const double alpha = options.alpha;
  const double denom = 1.0 + lambda * (1.0 - alpha);
  const double inv_n = 1.0 / static_cast<double>(n);

  auto objective = [&]() {
    double rss = 0;
    for (const double r : residual) rss += r * r;
    double l1 = 0, l2 = 0;
    for (const double b : beta) {
      l1 += std::fabs(b);
      l2 += b * b;
    }
    return 0.5 * inv_n * rss + lambda * (alpha * l1 + 0.5 * (1.0 - alpha) * l2);
  };

  model.converged = false;
  int sweeps = 0;
  while (sweeps < options.max_iter) {
    ++sweeps;
    double max_delta = 0;
    for (std::size_t j = 0; j < p; ++j) {
      if (model.feature_stds[j] == 0) continue;
      // rho_j = (1/n) sum_i z_ij (r_i + z_ij beta_j); with unit-variance
      // columns the partial residual correlation is rho_j = (1/n) z_j.r +
      // beta_j
      double zr = 0;
      for (std::size_t i = 0; i < n; ++i) zr += z.at(i, j) * residual[i];
      const double rho = inv_n * zr + beta[j];
      const double updated = soft_threshold(rho, lambda * alpha) / denom;
      const double delta = updated - beta[j];
      if (delta != 0) {
        for (std::size_t i = 0; i < n; ++i) residual[i] -= z.at(i, j) * delta;
        beta[j] = updated;
        max_delta = std::max(max_delta, std::fabs(delta));
      }
    }
    if (objective_trace) objective_trace->push_back(objective());
    if (max_delta < options.tol) {
      model.converged = true;
      break;
    }
  }

  model.iterations = sweeps;
  model.coefficients = std::move(beta);

  double shift = 0;
  for (std::size_t j = 0; j < p; ++j)
    if (model.feature_stds[j] != 0)
      shift += model.coefficients[j] * model.feature_means[j] / model.feature_stds[j];
  model.intercept = model.target_mean - shift;
  return model;
}

std::vector<double> predict(const ElasticNetModel& model, const DenseMatrix& x,
                            std::span<const std::string> columns) {
  const std::size_t p = model.feature_names.size();
  if (columns.size() != p ||
      !std::equal(columns.begin(), columns.end(), model.feature_names.begin()))
    throw DataError("predict: column set does not match the fitted model");
  if (x.n_cols != p) throw DataError("predict: column count mismatch");

  std::vector<double> out(x.n_rows, model.target_mean);
  for (std::size_t i = 0; i < x.n_rows; ++i) {
    double acc = model.target_mean;
    for (std::size_t j = 0; j < p; ++j) {
      if (model.feature_stds[j] == 0 || model.coefficients[j] == 0) continue;
      acc += model.coefficients[j] *
             (x.at(i, j) - model.feature_means[j]) / model.feature_stds[j];
    }
    out[i] = acc;
  }
  return out;
}

ImportanceReport importance(const ElasticNetModel& model) {
  ImportanceReport report;
  report.entries.reserve(model.feature_names.size());
  for (std::size_t j = 0; j < model.feature_names.size(); ++j)
    report.entries.push_back(
        {model.feature_names[j], std::fabs(model.coefficients[j]), 0});
  std::sort(report.entries.begin(), report.entries.end(),
            [](const ImportanceEntry& a, const ImportanceEntry& b) {
              if (a.importance != b.importance) return a.importance > b.importance;
              return a.feature < b.feature;
            });
  for (std::size_t i = 0; i < report.entries.size(); ++i)
    report.entries[i].rank = static_cast<int>(i + 1);
  return report;
}

std::string serialize_model(const ElasticNetModel& model) {
  std::ostringstream out;
  out << "format alsprog-elasticnet-v1\n";
  out << "lambda " << csv::format_double(model.lambda) << "\n";
  out << "alpha " << csv::format_double(model.alpha) << "\n";
  out << "iterations " << model.iterations << "\n";
  out << "converged " << (model.converged ? 1 : 0) << "\n";
  out << "target_mean " << csv::format_double(model.target_mean) << "\n";
  out << "intercept " << csv::format_double(model.intercept) << "\n";
  out << "n_features " << model.feature_names.size() << "\n";
  for (std::size_t j = 0; j < model.feature_names.size(); ++j) {
    out << "feature " << model.feature_names[j] << " "
        << csv::format_double(model.feature_means[j]) << " "
        << csv::format_double(model.feature_stds[j]) << " "
        << csv::format_double(model.coefficients[j]) << "\n";
  }
  return out.str();
}

ElasticNetModel deserialize_model(const std::string& text) {
  std::istringstream in(text);
  std::string key;
  ElasticNetModel model;
  std::size_t n_features = 0;
  bool saw_format = false;
  while (in >> key) {
    if (key == "format") {
      std::string v;
      in >> v;
      if (v != "alsprog-elasticnet-v1")
        throw DataError("model document: unknown format '" + v + "'");
      saw_format = true;
    } else if (key == "lambda") {
      in >> model.lambda;
    } else if (key == "alpha") {
      in >> model.alpha;
    } else if (key == "iterations") {
      in >> model.iterations;
    } else if (key == "converged") {
      int v;
      in >> v;
      model.converged = v != 0;
    } else if (key == "target_mean") {
      in >> model.target_mean;
    } else if (key == "intercept") {
      in >> model.intercept;
    } else if (key == "n_features") {
      in >> n_features;
    } else if (key == "feature") {
      std::string name;
      double mean, sd, coef;
      in >> name >> mean >> sd >> coef;
      model.feature_names.push_back(name);
      model.feature_means.push_back(mean);
      model.feature_stds.push_back(sd);
      model.coefficients.push_back(coef);
    } else {
      throw DataError("model document: unknown key '" + key + "'");
    }
  }
  if (!saw_format) throw DataError("model document: missing format line");
  if (model.feature_names.size() != n_features)
    throw DataError("model document: feature count mismatch");
  return model;
}

}  // namespace alsprog
