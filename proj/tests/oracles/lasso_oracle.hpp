#pragma once

// Independent L1-logistic solver for checking the coordinate-descent fit.

#include <vector>

#include "radfuse/selection.hpp"

namespace oracle {

struct LassoSolution {
  double intercept = 0.0;
  std::vector<double> coef;
  double objective = 0.0;
  int iterations = 0;
};

/// Projected gradient on the split beta = u - v (u, v >= 0) with Armijo
/// backtracking, on the problem's standardized design.
LassoSolution lasso_projected_gradient(const radfuse::LassoProblem& problem, double lambda,
                                       int max_iterations = 200000, double tolerance = 1e-13);

}  // namespace oracle
