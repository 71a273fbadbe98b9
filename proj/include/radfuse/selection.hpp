#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "radfuse/feature_table.hpp"
#include "radfuse/folds.hpp"

namespace radfuse {

/// L1-penalized logistic regression on z-scored columns.
struct LassoModel {
  double lambda = 0.0;
  double intercept = 0.0;
  // One entry per retained (non-constant) training column, table order.
  std::vector<std::string> keys;
  std::vector<double> mean;
  std::vector<double> scale;  // population standard deviation
  std::vector<double> coef;   // on the standardized scale

  std::vector<std::string> selected() const;
  double linear_predictor(std::span<const double> standardized) const;
};

struct LassoOptions {
  double tolerance = 1e-9;  // KKT violation
  int max_sweeps = 100000;
};

struct LassoFit {
  LassoModel model;
  double objective = 0.0;
  int sweeps = 0;
  bool converged = false;
};

/// Standardized design shared by a path of fits.
struct LassoProblem {
  std::vector<std::string> keys;
  std::vector<double> mean, scale;
  std::vector<double> x;  // column-major, n x p
  std::vector<double> y;
  std::size_t n = 0, p = 0;

  static LassoProblem from_table(const FeatureTable& table);
  double lambda_max() const;
  /// (1/n) sum of logistic losses + lambda * |beta|_1.
  double objective(double intercept, std::span<const double> coef, double lambda) const;
};

LassoFit fit_lasso_logistic(const LassoProblem& problem, double lambda,
                            const LassoOptions& options = {}, const LassoModel* warm = nullptr);
LassoFit fit_lasso_logistic(const FeatureTable& table, double lambda,
                            const LassoOptions& options = {});

/// Fits along a descending grid with warm starts.
std::vector<LassoFit> lasso_path(const LassoProblem& problem, std::span<const double> grid,
                                 const LassoOptions& options = {});

double lambda_max(const FeatureTable& table);

/// `count` values log-spaced from lambda_max down to lambda_max * ratio.
std::vector<double> lambda_grid(const FeatureTable& table, int count = 50, double ratio = 1e-3);

struct LassoSelection {
  double lambda = 0.0;
  LassoModel model;
  std::vector<std::string> selected;
  std::vector<double> mean_validation_auc;  // per grid value
};

/// Chooses the grid value with the best mean validation AUC over the plan's
/// folds, preferring the larger lambda on ties, then refits on every row.
LassoSelection select_lambda_cv(const FeatureTable& table, const FoldPlan& plan,
                                std::span<const double> grid, const LassoOptions& options = {});

double predict_proba(const LassoModel& model, const FeatureVector& features);
std::vector<double> predict_proba(const LassoModel& model, const FeatureTable& table);

void save_model(const std::filesystem::path& path, const LassoModel& model);
LassoModel load_model(const std::filesystem::path& path);

}  // namespace radfuse
