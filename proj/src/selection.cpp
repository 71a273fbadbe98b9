#include "radfuse/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "radfuse/error.hpp"
#include "radfuse/metrics.hpp"

namespace radfuse {

namespace {

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

class Solver {
 public:
  Solver(const LassoProblem& pr, double lambda) : pr_(pr), lambda_(lambda) {
    beta_.assign(pr.p, 0.0);
    eta_.assign(pr.n, 0.0);
    mean_sq_.assign(pr.p, 0.0);
    for (std::size_t j = 0; j < pr.p; ++j) {
      const double* x = col(j);
      double s = 0.0;
      for (std::size_t i = 0; i < pr.n; ++i) s += x[i] * x[i];
      mean_sq_[j] = s / static_cast<double>(pr.n);
    }
  }

  void start(double intercept, std::span<const double> beta) {
    b0_ = intercept;
    std::copy(beta.begin(), beta.end(), beta_.begin());
    for (std::size_t i = 0; i < pr_.n; ++i) eta_[i] = b0_;
    for (std::size_t j = 0; j < pr_.p; ++j)
      if (beta_[j] != 0.0) {
        const double* x = col(j);
        for (std::size_t i = 0; i < pr_.n; ++i) eta_[i] += beta_[j] * x[i];
      }
  }

  /// Returns false when no coordinate moved.
  bool sweep() {
    changed_ = false;
    update(nullptr, 1.0, 0.0, b0_);
    for (std::size_t j = 0; j < pr_.p; ++j) update(col(j), mean_sq_[j], lambda_, beta_[j]);
    return changed_;
  }

  double kkt_violation() const {
    double worst = std::abs(gradient(nullptr));
    for (std::size_t j = 0; j < pr_.p; ++j) {
      const double g = gradient(col(j));
      const double v = beta_[j] != 0.0 ? std::abs(g + lambda_ * (beta_[j] > 0 ? 1.0 : -1.0))
                                       : std::max(0.0, std::abs(g) - lambda_);
      worst = std::max(worst, v);
    }
    return worst;
  }

  double objective() const {
    double l1 = 0.0;
    for (double b : beta_) l1 += std::abs(b);
    return loss_at(eta_, nullptr, 0.0) + lambda_ * l1;
  }

  double intercept() const { return b0_; }
  const std::vector<double>& beta() const { return beta_; }

 private:
  const double* col(std::size_t j) const { return pr_.x.data() + j * pr_.n; }
  double xi(const double* x, std::size_t i) const { return x ? x[i] : 1.0; }

  // Mean logistic loss at eta + step * x.
  double loss_at(const std::vector<double>& eta, const double* x, double step) const {
    double s = 0.0;
    for (std::size_t i = 0; i < pr_.n; ++i) {
      const double t = eta[i] + step * xi(x, i);
      s += softplus(t) - pr_.y[i] * t;
    }
    return s / static_cast<double>(pr_.n);
  }

  // Change of the mean loss when eta moves by step * x, evaluated without
  // cancellation: softplus(t + d) - softplus(t) = log1p(sigmoid(t) expm1(d)).
  double loss_change(const double* x, double step) const {
    double s = 0.0;
    for (std::size_t i = 0; i < pr_.n; ++i) {
      const double d = step * xi(x, i);
      s += std::log1p(sigmoid(eta_[i]) * std::expm1(d)) - pr_.y[i] * d;
    }
    return s / static_cast<double>(pr_.n);
  }

  double gradient(const double* x) const {
    double g = 0.0;
    for (std::size_t i = 0; i < pr_.n; ++i) g += (sigmoid(eta_[i]) - pr_.y[i]) * xi(x, i);
    return g / static_cast<double>(pr_.n);
  }

  // One coordinate: proximal Newton step, or the majorize-minimize step with
  // the global logistic curvature bound when Newton does not decrease the
  // objective.
  void update(const double* x, double mean_sq, double lambda, double& b) {
    double g = 0.0, h = 0.0;
    for (std::size_t i = 0; i < pr_.n; ++i) {
      const double s = sigmoid(eta_[i]);
      const double v = xi(x, i);
      g += (s - pr_.y[i]) * v;
      h += s * (1.0 - s) * v * v;
    }
    g /= static_cast<double>(pr_.n);
    h /= static_cast<double>(pr_.n);
    if (b == 0.0 && std::abs(g) <= lambda * (1.0 + 1e-12)) return;

    if (h > 1e-300) {
      const double cand = soft_threshold(b - g / h, lambda / h);
      if (cand == b) return;
      if (try_step(x, lambda, b, cand)) return;
    }
    const double curvature = 0.25 * mean_sq;
    const double cand = soft_threshold(b - g / curvature, lambda / curvature);
    if (cand != b) try_step(x, lambda, b, cand);
  }

  bool try_step(const double* x, double lambda, double& b, double cand) {
    const double change = loss_change(x, cand - b) + lambda * (std::abs(cand) - std::abs(b));
    if (!(change < 0.0)) return false;
    for (std::size_t i = 0; i < pr_.n; ++i) eta_[i] += (cand - b) * xi(x, i);
    b = cand;
    changed_ = true;
    return true;
  }

  const LassoProblem& pr_;
  double lambda_;
  double b0_ = 0.0;
  bool changed_ = false;
  std::vector<double> beta_, eta_, mean_sq_;
};

}  // namespace

std::vector<std::string> LassoModel::selected() const {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < keys.size(); ++j)
    if (coef[j] != 0.0) out.push_back(keys[j]);
  return out;
}

double LassoModel::linear_predictor(std::span<const double> standardized) const {
  double t = intercept;
  for (std::size_t j = 0; j < coef.size(); ++j) t += coef[j] * standardized[j];
  return t;
}

LassoProblem LassoProblem::from_table(const FeatureTable& table) {
  require(table.size() >= 2, ErrorKind::Data, "LASSO needs at least 2 samples");
  LassoProblem pr;
  pr.n = table.size();
  const auto labels = table.labels();
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  require(pos > 0 && static_cast<std::size_t>(pos) < pr.n, ErrorKind::Data,
          "LASSO needs both classes in the training rows");
  for (int l : labels) pr.y.push_back(static_cast<double>(l));

  const auto n = static_cast<double>(pr.n);
  for (std::size_t c = 0; c < table.width(); ++c) {
    const auto v = table.column(c);
    if (std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); })) continue;
    double mean = 0.0;
    for (double a : v) mean += a;
    mean /= n;
    double var = 0.0;
    for (double a : v) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / n);
    if (!(sd > 0.0)) continue;
    pr.keys.push_back(table.keys()[c]);
    pr.mean.push_back(mean);
    pr.scale.push_back(sd);
    for (double a : v) pr.x.push_back((a - mean) / sd);
  }
  pr.p = pr.keys.size();
  require(pr.p > 0, ErrorKind::Data, "no non-constant feature columns");
  return pr;
}

double LassoProblem::lambda_max() const {
  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(n);
  double best = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    double g = 0.0;
    for (std::size_t i = 0; i < n; ++i) g += x[j * n + i] * (y[i] - ybar);
    best = std::max(best, std::abs(g / static_cast<double>(n)));
  }
  return best;
}

double LassoProblem::objective(double intercept, std::span<const double> coef, double lambda) const {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double t = intercept;
    for (std::size_t j = 0; j < p; ++j) t += coef[j] * x[j * n + i];
    s += softplus(t) - y[i] * t;
  }
  double l1 = 0.0;
  for (double b : coef) l1 += std::abs(b);
  return s / static_cast<double>(n) + lambda * l1;
}

LassoFit fit_lasso_logistic(const LassoProblem& problem, double lambda, const LassoOptions& options,
                            const LassoModel* warm) {
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorKind::InvalidArgument,
          "lambda must be finite and >= 0");
  Solver solver(problem, lambda);
  if (warm && warm->coef.size() == problem.p) {
    solver.start(warm->intercept, warm->coef);
  } else {
    double ybar = 0.0;
    for (double v : problem.y) ybar += v;
    ybar /= static_cast<double>(problem.n);
    const std::vector<double> zeros(problem.p, 0.0);
    solver.start(std::log(ybar / (1.0 - ybar)), zeros);
  }

  LassoFit fit;
  while (fit.sweeps < options.max_sweeps) {
    if (solver.kkt_violation() < options.tolerance) {
      fit.converged = true;
      break;
    }
    ++fit.sweeps;
    if (!solver.sweep()) break;
  }
  if (!fit.converged) fit.converged = solver.kkt_violation() < options.tolerance;

  fit.model.lambda = lambda;
  fit.model.intercept = solver.intercept();
  fit.model.keys = problem.keys;
  fit.model.mean = problem.mean;
  fit.model.scale = problem.scale;
  fit.model.coef = solver.beta();
  fit.objective = solver.objective();
  return fit;
}

LassoFit fit_lasso_logistic(const FeatureTable& table, double lambda, const LassoOptions& options) {
  return fit_lasso_logistic(LassoProblem::from_table(table), lambda, options);
}

std::vector<LassoFit> lasso_path(const LassoProblem& problem, std::span<const double> grid,
                                 const LassoOptions& options) {
  std::vector<LassoFit> out;
  out.reserve(grid.size());
  for (double lambda : grid)
    out.push_back(fit_lasso_logistic(problem, lambda, options, out.empty() ? nullptr : &out.back().model));
  return out;
}

double lambda_max(const FeatureTable& table) { return LassoProblem::from_table(table).lambda_max(); }

std::vector<double> lambda_grid(const FeatureTable& table, int count, double ratio) {
  require(count >= 1, ErrorKind::InvalidArgument, "lambda grid needs at least one value");
  require(ratio > 0.0 && ratio < 1.0, ErrorKind::InvalidArgument, "lambda grid ratio must be in (0, 1)");
  const double top = lambda_max(table);
  require(top > 0.0, ErrorKind::Data, "lambda_max is zero: no column correlates with the labels");
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k)
    grid[static_cast<std::size_t>(k)] =
        count == 1 ? top : top * std::pow(ratio, static_cast<double>(k) / (count - 1));
  return grid;
}

LassoSelection select_lambda_cv(const FeatureTable& table, const FoldPlan& plan,
                                std::span<const double> grid, const LassoOptions& options) {
  require(!grid.empty(), ErrorKind::InvalidArgument, "empty lambda grid");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    require(grid[k] >= 0.0, ErrorKind::InvalidArgument, "lambda grid values must be >= 0");
    if (k > 0)
      require(grid[k] < grid[k - 1], ErrorKind::InvalidArgument, "lambda grid must be descending");
  }
  validate_plan(plan, table.size());

  LassoSelection out;
  out.mean_validation_auc.assign(grid.size(), 0.0);
  for (const auto& fold : plan.folds) {
    const auto train = table.subset(fold.train);
    const auto validation = table.subset(fold.validation);
    const auto path = lasso_path(LassoProblem::from_table(train), grid, options);
    const auto labels = validation.labels();
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const auto scores = predict_proba(path[k].model, validation);
      out.mean_validation_auc[k] += roc_auc(scores, labels);
    }
  }
  std::size_t best = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    out.mean_validation_auc[k] /= static_cast<double>(plan.folds.size());
    if (out.mean_validation_auc[k] > out.mean_validation_auc[best]) best = k;
  }
  out.lambda = grid[best];
  out.model = fit_lasso_logistic(LassoProblem::from_table(table), out.lambda, options).model;
  out.selected = out.model.selected();
  return out;
}

double predict_proba(const LassoModel& model, const FeatureVector& features) {
  double t = model.intercept;
  for (std::size_t j = 0; j < model.keys.size(); ++j) {
    if (model.coef[j] == 0.0) continue;
    const auto v = features.find(model.keys[j]);
    require(v.has_value(), ErrorKind::InvalidArgument, "missing feature " + model.keys[j]);
    t += model.coef[j] * ((*v - model.mean[j]) / model.scale[j]);
  }
  return sigmoid(t);
}

std::vector<double> predict_proba(const LassoModel& model, const FeatureTable& table) {
  std::vector<std::ptrdiff_t> column(model.keys.size(), -1);
  for (std::size_t j = 0; j < model.keys.size(); ++j) {
    if (model.coef[j] == 0.0) continue;
    column[j] = table.find_key(model.keys[j]);
    require(column[j] >= 0, ErrorKind::InvalidArgument, "missing feature " + model.keys[j]);
  }
  std::vector<double> out;
  out.reserve(table.size());
  for (std::size_t r = 0; r < table.size(); ++r) {
    double t = model.intercept;
    for (std::size_t j = 0; j < model.keys.size(); ++j)
      if (column[j] >= 0)
        t += model.coef[j] *
             ((table.value(r, static_cast<std::size_t>(column[j])) - model.mean[j]) / model.scale[j]);
    out.push_back(sigmoid(t));
  }
  return out;
}

void save_model(const std::filesystem::path& path, const LassoModel& model) {
  nlohmann::ordered_json j;
  j["lambda"] = model.lambda;
  j["intercept"] = model.intercept;
  auto& stats = j["standardization"] = nlohmann::ordered_json::array();
  auto& coef = j["coefficients"] = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < model.keys.size(); ++k) {
    stats.push_back({{"key", model.keys[k]}, {"mean", model.mean[k]}, {"std", model.scale[k]}});
    if (model.coef[k] != 0.0) coef[model.keys[k]] = model.coef[k];
  }
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

LassoModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot read " + path.string());
  LassoModel m;
  try {
    nlohmann::json j;
    in >> j;
    m.lambda = j.at("lambda").get<double>();
    m.intercept = j.at("intercept").get<double>();
    const auto& coef = j.at("coefficients");
    for (const auto& s : j.at("standardization")) {
      m.keys.push_back(s.at("key").get<std::string>());
      m.mean.push_back(s.at("mean").get<double>());
      m.scale.push_back(s.at("std").get<double>());
      m.coef.push_back(coef.contains(m.keys.back()) ? coef.at(m.keys.back()).get<double>() : 0.0);
    }
    for (const auto& [key, value] : coef.items())
      require(std::find(m.keys.begin(), m.keys.end(), key) != m.keys.end(), ErrorKind::Format,
              "coefficient without standardization: " + key);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, path.string() + ": " + e.what());
  }
  for (double s : m.scale) require(s > 0.0, ErrorKind::Format, path.string() + ": non-positive std");
  return m;
}

}  // namespace radfuse
