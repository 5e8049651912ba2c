#include "alsprog/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "alsprog/csv.hpp"
#include "alsprog/error.hpp"
#include "alsprog/parallel.hpp"
#include "alsprog/rng.hpp"

namespace alsprog {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::vector<std::string>> partition(std::vector<std::string> ids,
                                                int k, Rng rng) {
  rng.shuffle(ids);
  std::vector<std::vector<std::string>> groups(k);
  const std::size_t n = ids.size();
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t extra = n % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (int g = 0; g < k; ++g) {
    const std::size_t size = base + (static_cast<std::size_t>(g) < extra ? 1 : 0);
    groups[g].assign(ids.begin() + pos, ids.begin() + pos + size);
    pos += size;
  }
  return groups;
}

}  // namespace

FoldPlan plan_folds(std::vector<std::string> patient_ids, int outer_k,
                    int inner_k, std::uint64_t seed) {
  if (outer_k < 2 || inner_k < 2)
    throw ConfigError("plan_folds: outer_k and inner_k must be >= 2");
  std::sort(patient_ids.begin(), patient_ids.end());
  patient_ids.erase(std::unique(patient_ids.begin(), patient_ids.end()),
                    patient_ids.end());
  if (patient_ids.size() < static_cast<std::size_t>(outer_k))
    throw ConfigError("plan_folds: " + std::to_string(patient_ids.size()) +
                      " patients < outer_k=" + std::to_string(outer_k) +
                      "; lower outer_k or add patients");

  const Rng master(seed);
  FoldPlan plan;
  plan.seed = seed;
  plan.outer_k = outer_k;
  plan.inner_k = inner_k;

  const auto outer_groups =
      partition(patient_ids, outer_k, master.substream("folds/outer"));
  for (int o = 0; o < outer_k; ++o) {
    OuterFold fold;
    fold.test_patients = outer_groups[o];
    for (int g = 0; g < outer_k; ++g) {
      if (g == o) continue;
      fold.trainval_patients.insert(fold.trainval_patients.end(),
                                    outer_groups[g].begin(), outer_groups[g].end());
    }
    std::sort(fold.trainval_patients.begin(), fold.trainval_patients.end());
    if (fold.trainval_patients.size() < static_cast<std::size_t>(inner_k))
      throw ConfigError("plan_folds: outer fold " + std::to_string(o) + " leaves " +
                        std::to_string(fold.trainval_patients.size()) +
                        " patients < inner_k=" + std::to_string(inner_k) +
                        "; lower inner_k");
    const auto inner_groups = partition(
        fold.trainval_patients, inner_k,
        master.substream("folds/inner/" + std::to_string(o)));
    for (int f = 0; f < inner_k; ++f) {
      InnerFold inner;
      inner.val_patients = inner_groups[f];
      for (int g = 0; g < inner_k; ++g) {
        if (g == f) continue;
        inner.train_patients.insert(inner.train_patients.end(),
                                    inner_groups[g].begin(), inner_groups[g].end());
      }
      std::sort(inner.train_patients.begin(), inner.train_patients.end());
      std::sort(inner.val_patients.begin(), inner.val_patients.end());
      fold.inner.push_back(std::move(inner));
    }
    std::sort(fold.test_patients.begin(), fold.test_patients.end());
    plan.outer.push_back(std::move(fold));
  }
  return plan;
}

double naive_predict(const ObservationWindow& window) {
  return static_cast<double>(window.previous_value.value());
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::naive: return "naive";
    case ModelKind::elasticnet: return "elasticnet";
    case ModelKind::lasso: return "lasso";
  }
  return "?";
}

std::string to_string(DataMode d) {
  return d == DataMode::clinical ? "clinical" : "augmented";
}

std::string Candidate::id() const {
  if (kind == ModelKind::naive) return "naive";
  return to_string(kind) + "_" + to_string(featureset) + "_" + to_string(data);
}

GridConfig GridConfig::defaults() {
  GridConfig g;
  const double lo = std::log10(1e-4), hi = std::log10(10.0);
  for (int i = 0; i < 20; ++i)
    g.lambdas.push_back(std::pow(10.0, lo + (hi - lo) * i / 19.0));
  for (int i = 1; i <= 10; ++i) g.en_alphas.push_back(0.1 * i);
  return g;
}

namespace {

// ---------------------------------------------------------------------
// training machinery
// ---------------------------------------------------------------------

struct PreparedFold {
  bool valid = false;
  std::vector<std::string> columns;  // model input columns
  DenseMatrix train_x;
  std::vector<double> train_y;
  DenseMatrix val_x;  // same columns, imputed with train medians
  std::vector<int> val_targets;
  std::vector<double> val_naive;  // previous_value of val rows
  std::vector<double> impute_medians;
};

std::vector<std::size_t> intersect_rows(const FeatureMatrix& m, QuestionId q,
                                        std::span<const std::string> patients) {
  const std::set<std::string> set(patients.begin(), patients.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.keys.size(); ++i)
    if (m.keys[i].question == q.index() && set.count(m.keys[i].patient_id))
      out.push_back(i);
  return out;
}

// restrict a matrix's sensor columns to the median subset
bool is_median_column(const std::string& name) {
  static const std::string suffix = "__median";
  return name.size() >= suffix.size() &&
         name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
}

FeatureMatrix restrict_featureset(const FeatureMatrix& m, FeatureMode fs) {
  if (fs == FeatureMode::catalog) return m;
  FeatureMatrix out;
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < m.columns.size(); ++c) {
    if (m.kinds[c] == ColumnKind::sensor && !is_median_column(m.columns[c])) continue;
    keep.push_back(c);
    out.columns.push_back(m.columns[c]);
    out.kinds.push_back(m.kinds[c]);
  }
  out.keys = m.keys;
  out.targets = m.targets;
  out.rows.reserve(m.rows.size());
  for (const auto& row : m.rows) {
    std::vector<double> r(keep.size());
    for (std::size_t j = 0; j < keep.size(); ++j) r[j] = row[keep[j]];
    out.rows.push_back(std::move(r));
  }
  return out;
}

struct FittedPipeline {
  ColumnTransform transform;
  std::vector<std::string> model_columns;  // engineered + static + selected sensor
};

// prune + relevance selection fitted on training rows only
FittedPipeline fit_pipeline(const FeatureMatrix& train, QuestionId q,
                            const PruneConfig& prune, const SelectionConfig& sel) {
  FittedPipeline out;
  out.transform = fit_prune(train, prune);
  FeatureMatrix imputed = apply_transform(train, out.transform);
  const RelevanceReport relevance = relevance_for_question(imputed, q, sel);
  const std::set<std::string> selected(relevance.selected_features().begin(),
                                       relevance.selected_features().end());
  for (std::size_t c = 0; c < imputed.columns.size(); ++c) {
    if (imputed.kinds[c] == ColumnKind::sensor && !selected.count(imputed.columns[c]))
      continue;
    out.model_columns.push_back(imputed.columns[c]);
  }
  return out;
}

DenseMatrix to_dense(const FeatureMatrix& m, std::span<const std::string> columns) {
  DenseMatrix d;
  d.n_rows = m.rows.size();
  d.n_cols = columns.size();
  d.data.assign(d.n_rows * d.n_cols, 0.0);
  std::vector<std::size_t> src;
  src.reserve(columns.size());
  for (const auto& c : columns) src.push_back(m.column_index(c));
  for (std::size_t i = 0; i < d.n_rows; ++i)
    for (std::size_t j = 0; j < d.n_cols; ++j)
      d.at(i, j) = m.rows[i][src[j]];
  return d;
}

std::vector<double> medians_for(const ColumnTransform& t,
                                std::span<const std::string> columns) {
  std::vector<double> out;
  out.reserve(columns.size());
  for (const auto& name : columns) {
    bool found = false;
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
      if (t.columns[i] == name) {
        out.push_back(t.impute_medians[i]);
        found = true;
        break;
      }
    }
    if (!found) throw NumericError("internal: no impute median for " + name);
  }
  return out;
}

// Assembles one inner (or outer) fold's training and validation matrices.
// `train_src` is the candidate's data mode matrix; validation rows always
// come from the clinical matrix.
PreparedFold prepare_fold(const FeatureMatrix& train_src,
                          const FeatureMatrix& clinical, QuestionId q,
                          std::span<const std::string> train_patients,
                          std::span<const std::string> val_patients,
                          const PruneConfig& prune, const SelectionConfig& sel) {
  PreparedFold out;
  const auto train_rows = intersect_rows(train_src, q, train_patients);
  const auto val_rows = intersect_rows(clinical, q, val_patients);
  if (train_rows.size() < 2 || val_rows.empty()) return out;

  const FeatureMatrix train = subset_rows(train_src, train_rows);
  FittedPipeline pipeline;
  try {
    pipeline = fit_pipeline(train, q, prune, sel);
  } catch (const DataError&) {
    return out;  // e.g. every column pruned in a degenerate fold
  }

  const FeatureMatrix train_imputed = apply_transform(train, pipeline.transform);
  const FeatureMatrix val = subset_rows(clinical, val_rows);
  const FeatureMatrix val_imputed = apply_transform(val, pipeline.transform);

  out.columns = pipeline.model_columns;
  out.train_x = to_dense(train_imputed, out.columns);
  out.train_y.reserve(train_imputed.targets.size());
  for (const int t : train_imputed.targets)
    out.train_y.push_back(static_cast<double>(t));
  out.val_x = to_dense(val_imputed, out.columns);
  out.val_targets = val_imputed.targets;

  const std::size_t prev_col = val.column_index("previous_value");
  out.val_naive.reserve(val.rows.size());
  for (const auto& row : val.rows) out.val_naive.push_back(row[prev_col]);

  out.impute_medians = medians_for(pipeline.transform, out.columns);
  out.valid = true;
  return out;
}

double score_rmse(std::span<const double> raw, std::span<const int> targets,
                  bool rounded) {
  std::vector<PredictionPair> pairs;
  pairs.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double pred =
        rounded ? static_cast<double>(postprocess(raw[i]).value()) : raw[i];
    pairs.emplace_back(Score(targets[i]), pred);
  }
  return compute_metrics(pairs).rmse;
}

struct CellKey {
  double lambda = 0;
  double alpha = 1;
};

std::vector<CellKey> cells_for(ModelKind kind, const GridConfig& grid) {
  std::vector<CellKey> cells;
  if (kind == ModelKind::lasso) {
    for (const double l : grid.lambdas) cells.push_back({l, 1.0});
    return cells;
  }
  for (const double a : grid.en_alphas)
    for (const double l : grid.lambdas) cells.push_back({l, a});
  return cells;
}

// Mean fold-RMSE per cell over a set of prepared folds; lambdas descend
// within each alpha so fits warm-start along the path.
std::vector<GridCellStats> run_grid(std::span<const PreparedFold> folds,
                                    std::span<const CellKey> cells,
                                    const HarnessConfig& cfg) {
  std::vector<GridCellStats> stats(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    stats[c].lambda = cells[c].lambda;
    stats[c].alpha = cells[c].alpha;
  }
  std::vector<double> sums(cells.size(), 0.0);
  std::vector<std::size_t> counts(cells.size(), 0);
  std::vector<bool> failed(cells.size(), false);

  // group cell indices by alpha, order lambdas descending within the group
  std::map<double, std::vector<std::size_t>> by_alpha;
  for (std::size_t c = 0; c < cells.size(); ++c) by_alpha[cells[c].alpha].push_back(c);
  for (auto& [alpha, idx] : by_alpha)
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return cells[a].lambda > cells[b].lambda;
    });

  for (const PreparedFold& fold : folds) {
    if (!fold.valid) continue;
    for (const auto& [alpha, idx] : by_alpha) {
      ElasticNetModel warm;
      bool have_warm = false;
      for (const std::size_t c : idx) {
        if (failed[c]) continue;
        FitOptions opt;
        opt.lambda = cells[c].lambda;
        opt.alpha = cells[c].alpha;
        opt.tol = cfg.solver_tol;
        opt.max_iter = cfg.solver_max_iter;
        try {
          const ElasticNetModel model =
              fit(fold.train_x, fold.train_y, fold.columns, opt,
                  have_warm ? &warm : nullptr);
          const auto raw = predict(model, fold.val_x, fold.columns);
          sums[c] += score_rmse(raw, fold.val_targets, cfg.rounded_metrics);
          ++counts[c];
          warm = model;
          have_warm = true;
        } catch (const NumericError&) {
          failed[c] = true;
        }
      }
    }
  }

  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (!failed[c] && counts[c] > 0) {
      stats[c].valid = true;
      stats[c].n_folds = counts[c];
      stats[c].mean_val_rmse = sums[c] / static_cast<double>(counts[c]);
    }
  }
  return stats;
}

// ties prefer stronger regularization: larger lambda, then larger alpha
std::optional<std::size_t> best_cell(std::span<const GridCellStats> cells) {
  std::optional<std::size_t> best;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (!cells[c].valid) continue;
    if (!best) {
      best = c;
      continue;
    }
    const GridCellStats& cur = cells[c];
    const GridCellStats& b = cells[*best];
    if (cur.mean_val_rmse < b.mean_val_rmse ||
        (cur.mean_val_rmse == b.mean_val_rmse &&
         (cur.lambda > b.lambda ||
          (cur.lambda == b.lambda && cur.alpha > b.alpha))))
      best = c;
  }
  return best;
}

}  // namespace

TrainedBundle train_bundle(const FeatureMatrix& clinical,
                           const FeatureMatrix* augmented, const FoldPlan& plan,
                           const HarnessConfig& cfg) {
  // candidate universe for this run
  std::vector<FeatureMode> featuresets = {FeatureMode::median};
  for (std::size_t c = 0; c < clinical.columns.size(); ++c) {
    if (clinical.kinds[c] == ColumnKind::sensor && !is_median_column(clinical.columns[c])) {
      featuresets.push_back(FeatureMode::catalog);
      break;
    }
  }
  std::vector<DataMode> data_modes = {DataMode::clinical};
  if (augmented) data_modes.push_back(DataMode::augmented);

  std::vector<Candidate> candidates = {Candidate{}};  // naive
  for (const ModelKind kind : {ModelKind::elasticnet, ModelKind::lasso})
    for (const FeatureMode fs : featuresets)
      for (const DataMode dm : data_modes)
        candidates.push_back(Candidate{kind, fs, dm});

  // restricted matrices per (featureset, data mode)
  std::map<std::pair<int, int>, FeatureMatrix> matrices;
  for (const FeatureMode fs : featuresets) {
    matrices[{static_cast<int>(fs), static_cast<int>(DataMode::clinical)}] =
        restrict_featureset(clinical, fs);
    if (augmented)
      matrices[{static_cast<int>(fs), static_cast<int>(DataMode::augmented)}] =
          restrict_featureset(*augmented, fs);
  }
  const auto& matrix_for = [&](FeatureMode fs, DataMode dm) -> const FeatureMatrix& {
    return matrices.at({static_cast<int>(fs), static_cast<int>(dm)});
  };

  std::set<std::string> patient_set;
  for (const auto& key : clinical.keys) patient_set.insert(key.patient_id);
  if (augmented)
    for (const auto& key : augmented->keys) patient_set.insert(key.patient_id);

  TrainedBundle bundle;
  bundle.trained_patients.assign(patient_set.begin(), patient_set.end());
  bundle.report.questions.resize(QuestionId::kCount);
  bundle.predictors.resize(QuestionId::kCount);
  bundle.report_models.resize(QuestionId::kCount);

  parallel_for(QuestionId::kCount, cfg.threads, [&](std::size_t qi) {
    const QuestionId q(static_cast<int>(qi) + 1);
    QuestionSelection selection;
    selection.question = q.index();

    struct CandidateState {
      Candidate candidate;
      CandidateResult result;
      std::optional<CellKey> overall_best;
    };
    std::vector<CandidateState> states;

    for (const Candidate& cand : candidates) {
      CandidateState state;
      state.candidate = cand;
      state.result.candidate_id = cand.id();
      state.result.outer_test_rmse.assign(plan.outer.size(), kNaN);

      if (cand.kind == ModelKind::naive) {
        // the baseline has no hyperparameters; its validation RMSE pools
        // the same inner folds the models see
        double sum = 0;
        std::size_t count = 0;
        for (std::size_t o = 0; o < plan.outer.size(); ++o) {
          const OuterFold& of = plan.outer[o];
          for (const InnerFold& inf : of.inner) {
            const auto val_rows = intersect_rows(clinical, q, inf.val_patients);
            if (val_rows.empty()) continue;
            std::vector<double> raw;
            std::vector<int> targets;
            const std::size_t prev_col = clinical.column_index("previous_value");
            for (const std::size_t r : val_rows) {
              raw.push_back(clinical.rows[r][prev_col]);
              targets.push_back(clinical.targets[r]);
            }
            sum += score_rmse(raw, targets, cfg.rounded_metrics);
            ++count;
          }
          const auto test_rows = intersect_rows(clinical, q, of.test_patients);
          if (!test_rows.empty()) {
            std::vector<double> raw;
            std::vector<int> targets;
            const std::size_t prev_col = clinical.column_index("previous_value");
            for (const std::size_t r : test_rows) {
              raw.push_back(clinical.rows[r][prev_col]);
              targets.push_back(clinical.targets[r]);
            }
            state.result.outer_test_rmse[o] =
                score_rmse(raw, targets, cfg.rounded_metrics);
          }
        }
        if (count > 0) {
          state.result.evaluable = true;
          state.result.mean_val_rmse = sum / static_cast<double>(count);
        }
        state.result.best_lambda = kNaN;
        state.result.best_alpha = kNaN;
        states.push_back(std::move(state));
        continue;
      }

      const FeatureMatrix& train_src = matrix_for(cand.featureset, cand.data);
      const auto cells = cells_for(cand.kind, cfg.grid);

      std::vector<double> pooled_sum(cells.size(), 0.0);
      std::vector<std::size_t> pooled_count(cells.size(), 0);

      try {
        for (std::size_t o = 0; o < plan.outer.size(); ++o) {
          const OuterFold& of = plan.outer[o];
          std::vector<PreparedFold> folds;
          folds.reserve(of.inner.size());
          for (const InnerFold& inf : of.inner)
            folds.push_back(prepare_fold(train_src, clinical, q, inf.train_patients,
                                         inf.val_patients, cfg.prune, cfg.selection));
          const auto stats = run_grid(folds, cells, cfg);
          for (std::size_t c = 0; c < cells.size(); ++c) {
            if (!stats[c].valid) continue;
            pooled_sum[c] += stats[c].mean_val_rmse * stats[c].n_folds;
            pooled_count[c] += stats[c].n_folds;
          }

          // per-outer hyperparameters for the honest test estimate
          const auto ob = best_cell(stats);
          if (!ob) continue;
          const PreparedFold outer_fit =
              prepare_fold(train_src, clinical, q, of.trainval_patients,
                           of.test_patients, cfg.prune, cfg.selection);
          if (!outer_fit.valid) continue;
          FitOptions opt;
          opt.lambda = stats[*ob].lambda;
          opt.alpha = stats[*ob].alpha;
          opt.tol = cfg.solver_tol;
          opt.max_iter = cfg.solver_max_iter;
          const ElasticNetModel model =
              fit(outer_fit.train_x, outer_fit.train_y, outer_fit.columns, opt);
          const auto raw = predict(model, outer_fit.val_x, outer_fit.columns);
          state.result.outer_test_rmse[o] =
              score_rmse(raw, outer_fit.val_targets, cfg.rounded_metrics);
        }

        std::vector<GridCellStats> pooled(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
          pooled[c].lambda = cells[c].lambda;
          pooled[c].alpha = cells[c].alpha;
          if (pooled_count[c] > 0) {
            pooled[c].valid = true;
            pooled[c].n_folds = pooled_count[c];
            pooled[c].mean_val_rmse =
                pooled_sum[c] / static_cast<double>(pooled_count[c]);
          }
        }
        const auto overall = best_cell(pooled);
        if (overall) {
          state.result.evaluable = true;
          state.result.mean_val_rmse = pooled[*overall].mean_val_rmse;
          state.result.best_lambda = pooled[*overall].lambda;
          state.result.best_alpha = pooled[*overall].alpha;
          state.overall_best = CellKey{pooled[*overall].lambda, pooled[*overall].alpha};
        }
      } catch (const std::exception&) {
        // candidate failed for this question only; it simply does not
        // compete here
        state.result.evaluable = false;
      }
      states.push_back(std::move(state));
    }

    // winner: minimal mean validation RMSE; ties -> naive, then id
    std::optional<std::size_t> win;
    for (std::size_t s = 0; s < states.size(); ++s) {
      if (!states[s].result.evaluable) continue;
      if (!win) {
        win = s;
        continue;
      }
      const auto& cur = states[s];
      const auto& best = states[*win];
      const bool cur_naive = cur.candidate.kind == ModelKind::naive;
      const bool best_naive = best.candidate.kind == ModelKind::naive;
      if (cur.result.mean_val_rmse < best.result.mean_val_rmse ||
          (cur.result.mean_val_rmse == best.result.mean_val_rmse &&
           ((cur_naive && !best_naive) ||
            (cur_naive == best_naive &&
             cur.result.candidate_id < best.result.candidate_id))))
        win = s;
    }

    QuestionPredictor predictor;
    predictor.question = q.index();
    std::optional<QuestionPredictor> report_model;

    auto refit_all = [&](const CandidateState& state) -> QuestionPredictor {
      QuestionPredictor p;
      p.question = q.index();
      p.candidate_id = state.result.candidate_id;
      p.is_naive = false;
      const FeatureMatrix& src =
          matrix_for(state.candidate.featureset, state.candidate.data);
      const auto rows = rows_for_question(src, q);
      if (rows.size() < 2 || !state.overall_best)
        throw NumericError("final refit unavailable");
      const FeatureMatrix train = subset_rows(src, rows);
      const FittedPipeline pipeline =
          fit_pipeline(train, q, cfg.prune, cfg.selection);
      const FeatureMatrix imputed = apply_transform(train, pipeline.transform);
      const DenseMatrix x = to_dense(imputed, pipeline.model_columns);
      std::vector<double> y;
      y.reserve(imputed.targets.size());
      for (const int t : imputed.targets) y.push_back(static_cast<double>(t));
      FitOptions opt;
      opt.lambda = state.overall_best->lambda;
      opt.alpha = state.overall_best->alpha;
      opt.tol = cfg.solver_tol;
      opt.max_iter = cfg.solver_max_iter;
      p.model = fit(x, y, pipeline.model_columns, opt);
      p.impute_medians = medians_for(pipeline.transform, pipeline.model_columns);
      return p;
    };

    if (win && states[*win].candidate.kind != ModelKind::naive) {
      try {
        predictor = refit_all(states[*win]);
      } catch (const std::exception&) {
        predictor = QuestionPredictor{};  // fall back to naive
        predictor.question = q.index();
      }
    }

    // best linear candidate (by validation RMSE) for importance reporting
    std::optional<std::size_t> best_linear;
    for (std::size_t s = 0; s < states.size(); ++s) {
      if (states[s].candidate.kind == ModelKind::naive || !states[s].result.evaluable)
        continue;
      if (!best_linear ||
          states[s].result.mean_val_rmse < states[*best_linear].result.mean_val_rmse ||
          (states[s].result.mean_val_rmse ==
               states[*best_linear].result.mean_val_rmse &&
           states[s].result.candidate_id < states[*best_linear].result.candidate_id))
        best_linear = s;
    }
    if (!predictor.is_naive) {
      report_model = predictor;
    } else if (best_linear) {
      try {
        report_model = refit_all(states[*best_linear]);
      } catch (const std::exception&) {
        report_model = std::nullopt;
      }
    }

    // the report records the true selection outcome even when a failed
    // final refit makes the packaged predictor fall back to naive
    selection.winner = win ? states[*win].result.candidate_id : "naive";
    for (auto& state : states)
      selection.candidates.push_back(std::move(state.result));

    bundle.report.questions[qi] = std::move(selection);
    bundle.predictors[qi] = std::move(predictor);
    bundle.report_models[qi] = std::move(report_model);
  });

  return bundle;
}

double predict_row(const QuestionPredictor& predictor, const FeatureMatrix& m,
                   std::size_t row) {
  if (predictor.is_naive) {
    const std::size_t prev = m.column_index("previous_value");
    return m.rows[row][prev];
  }
  const std::size_t p = predictor.model.feature_names.size();
  DenseMatrix x;
  x.n_rows = 1;
  x.n_cols = p;
  x.data.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    const std::size_t c = m.column_index(predictor.model.feature_names[j]);
    const double v = m.rows[row][c];
    x.data[j] = std::isnan(v) ? predictor.impute_medians[j] : v;
  }
  return predict(predictor.model, x, predictor.model.feature_names)[0];
}

EvalOutput evaluate_bundle(const TrainedBundle& bundle, const FeatureMatrix& eval,
                           bool rounded_metrics,
                           std::vector<std::string>* warnings) {
  if (warnings) {
    const std::set<std::string> trained(bundle.trained_patients.begin(),
                                        bundle.trained_patients.end());
    std::set<std::string> overlap;
    for (const auto& key : eval.keys)
      if (trained.count(key.patient_id)) overlap.insert(key.patient_id);
    if (!overlap.empty())
      warnings->push_back("evaluate: " + std::to_string(overlap.size()) +
                          " patient(s) overlap the training set");
  }

  EvalOutput out;
  std::vector<PredictionPair> all_pairs;
  for (const QuestionId q : QuestionId::all()) {
    const QuestionPredictor& predictor = bundle.predictors[q.offset()];
    const auto rows = rows_for_question(eval, q);
    if (rows.empty()) continue;
    std::vector<PredictionPair> pairs;
    for (const std::size_t r : rows) {
      const double raw = predict_row(predictor, eval, r);
      const int rounded = postprocess(raw).value();
      out.predictions.push_back(
          EvalPrediction{eval.keys[r], raw, rounded, eval.targets[r]});
      const double scored = rounded_metrics ? static_cast<double>(rounded) : raw;
      pairs.emplace_back(Score(eval.targets[r]), scored);
      all_pairs.emplace_back(Score(eval.targets[r]), scored);
    }
    out.per_question.emplace_back(q.index(), compute_metrics(pairs));
  }
  if (all_pairs.empty()) throw DataError("evaluate: no predictions to score");
  out.overall = compute_metrics(all_pairs);
  return out;
}

std::string serialize_predictor(const QuestionPredictor& p) {
  std::ostringstream out;
  out << "format alsprog-predictor-v1\n";
  out << "question " << p.question << "\n";
  out << "candidate " << p.candidate_id << "\n";
  if (p.is_naive) return out.str();
  out << "lambda " << csv::format_double(p.model.lambda) << "\n";
  out << "alpha " << csv::format_double(p.model.alpha) << "\n";
  out << "iterations " << p.model.iterations << "\n";
  out << "converged " << (p.model.converged ? 1 : 0) << "\n";
  out << "target_mean " << csv::format_double(p.model.target_mean) << "\n";
  out << "intercept " << csv::format_double(p.model.intercept) << "\n";
  out << "n_features " << p.model.feature_names.size() << "\n";
  for (std::size_t j = 0; j < p.model.feature_names.size(); ++j) {
    out << "feature " << p.model.feature_names[j] << " "
        << csv::format_double(p.model.feature_means[j]) << " "
        << csv::format_double(p.model.feature_stds[j]) << " "
        << csv::format_double(p.model.coefficients[j]) << " "
        << csv::format_double(p.impute_medians[j]) << "\n";
  }
  return out.str();
}

QuestionPredictor deserialize_predictor(const std::string& text) {
  std::istringstream in(text);
  QuestionPredictor p;
  std::string key;
  std::size_t n_features = 0;
  bool saw_format = false;
  while (in >> key) {
    if (key == "format") {
      std::string v;
      in >> v;
      if (v != "alsprog-predictor-v1")
        throw DataError("predictor document: unknown format '" + v + "'");
      saw_format = true;
    } else if (key == "question") {
      in >> p.question;
    } else if (key == "candidate") {
      in >> p.candidate_id;
      p.is_naive = p.candidate_id == "naive";
    } else if (key == "lambda") {
      in >> p.model.lambda;
    } else if (key == "alpha") {
      in >> p.model.alpha;
    } else if (key == "iterations") {
      in >> p.model.iterations;
    } else if (key == "converged") {
      int v;
      in >> v;
      p.model.converged = v != 0;
    } else if (key == "target_mean") {
      in >> p.model.target_mean;
    } else if (key == "intercept") {
      in >> p.model.intercept;
    } else if (key == "n_features") {
      in >> n_features;
    } else if (key == "feature") {
      std::string name;
      double mean, sd, coef, med;
      in >> name >> mean >> sd >> coef >> med;
      p.model.feature_names.push_back(name);
      p.model.feature_means.push_back(mean);
      p.model.feature_stds.push_back(sd);
      p.model.coefficients.push_back(coef);
      p.impute_medians.push_back(med);
    } else {
      throw DataError("predictor document: unknown key '" + key + "'");
    }
  }
  if (!saw_format) throw DataError("predictor document: missing format line");
  if (!p.is_naive && p.model.feature_names.size() != n_features)
    throw DataError("predictor document: feature count mismatch");
  return p;
}

namespace {

std::string fmt_or_empty(double v) {
  return std::isnan(v) ? "" : csv::format_double(v);
}

}  // namespace

void write_bundle(const std::filesystem::path& dir, const TrainedBundle& bundle) {
  std::filesystem::create_directories(dir);

  for (const QuestionId q : QuestionId::all()) {
    char name[32];
    std::snprintf(name, sizeof(name), "q%02d.model", q.index());
    csv::write_text_atomic(dir / name,
                           serialize_predictor(bundle.predictors[q.offset()]));
    if (bundle.report_models[q.offset()].has_value() &&
        bundle.predictors[q.offset()].is_naive) {
      std::snprintf(name, sizeof(name), "q%02d.report_model", q.index());
      csv::write_text_atomic(dir / name,
                             serialize_predictor(*bundle.report_models[q.offset()]));
    }
  }

  std::vector<std::string> header = {"question", "candidate", "mean_val_rmse",
                                     "best_lambda", "best_alpha",
                                     "outer_test_rmse_mean", "winner"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& qs : bundle.report.questions) {
    for (const auto& cr : qs.candidates) {
      double sum = 0;
      std::size_t n = 0;
      for (const double v : cr.outer_test_rmse) {
        if (!std::isnan(v)) {
          sum += v;
          ++n;
        }
      }
      rows.push_back({csv::format_int(qs.question), cr.candidate_id,
                      cr.evaluable ? csv::format_double(cr.mean_val_rmse) : "",
                      fmt_or_empty(cr.best_lambda), fmt_or_empty(cr.best_alpha),
                      n ? csv::format_double(sum / static_cast<double>(n)) : "",
                      cr.candidate_id == qs.winner ? "1" : "0"});
    }
  }
  csv::write_file(dir / "selection_report.csv", header, rows);

  std::ostringstream meta;
  meta << "format alsprog-bundle-v1\n";
  for (const auto& p : bundle.trained_patients) meta << "patient " << p << "\n";
  csv::write_text_atomic(dir / "bundle_meta.txt", meta.str());
}

TrainedBundle read_bundle(const std::filesystem::path& dir) {
  TrainedBundle bundle;
  bundle.predictors.resize(QuestionId::kCount);
  bundle.report_models.resize(QuestionId::kCount);
  for (const QuestionId q : QuestionId::all()) {
    char name[32];
    std::snprintf(name, sizeof(name), "q%02d.model", q.index());
    bundle.predictors[q.offset()] =
        deserialize_predictor(csv::read_text(dir / name));
    std::snprintf(name, sizeof(name), "q%02d.report_model", q.index());
    if (std::filesystem::exists(dir / name))
      bundle.report_models[q.offset()] =
          deserialize_predictor(csv::read_text(dir / name));
    else if (!bundle.predictors[q.offset()].is_naive)
      bundle.report_models[q.offset()] = bundle.predictors[q.offset()];
  }

  const std::string meta = csv::read_text(dir / "bundle_meta.txt");
  std::istringstream in(meta);
  std::string key;
  while (in >> key) {
    if (key == "format") {
      std::string v;
      in >> v;
      if (v != "alsprog-bundle-v1")
        throw DataError("bundle_meta: unknown format '" + v + "'");
    } else if (key == "patient") {
      std::string id;
      in >> id;
      bundle.trained_patients.push_back(id);
    } else {
      throw DataError("bundle_meta: unknown key '" + key + "'");
    }
  }
  return bundle;
}

}  // namespace alsprog
