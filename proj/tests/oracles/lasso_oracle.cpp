#include "oracles/lasso_oracle.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

namespace {

struct State {
  double b0 = 0.0;
  std::vector<double> u, v;
};

double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double smooth(const radfuse::LassoProblem& pr, const State& s, double lambda) {
  double loss = 0.0;
  for (std::size_t i = 0; i < pr.n; ++i) {
    double eta = s.b0;
    for (std::size_t j = 0; j < pr.p; ++j) eta += pr.x[j * pr.n + i] * (s.u[j] - s.v[j]);
    loss += softplus(eta) - pr.y[i] * eta;
  }
  double pen = 0.0;
  for (std::size_t j = 0; j < pr.p; ++j) pen += s.u[j] + s.v[j];
  return loss / static_cast<double>(pr.n) + lambda * pen;
}

void gradient(const radfuse::LassoProblem& pr, const State& s, double lambda, State& g) {
  std::vector<double> resid(pr.n);
  for (std::size_t i = 0; i < pr.n; ++i) {
    double eta = s.b0;
    for (std::size_t j = 0; j < pr.p; ++j) eta += pr.x[j * pr.n + i] * (s.u[j] - s.v[j]);
    resid[i] = (1.0 / (1.0 + std::exp(-eta)) - pr.y[i]) / static_cast<double>(pr.n);
  }
  g.b0 = 0.0;
  for (double r : resid) g.b0 += r;
  g.u.assign(pr.p, 0.0);
  g.v.assign(pr.p, 0.0);
  for (std::size_t j = 0; j < pr.p; ++j) {
    double d = 0.0;
    for (std::size_t i = 0; i < pr.n; ++i) d += pr.x[j * pr.n + i] * resid[i];
    g.u[j] = d + lambda;
    g.v[j] = -d + lambda;
  }
}

}  // namespace

LassoSolution lasso_projected_gradient(const radfuse::LassoProblem& pr, double lambda,
                                       int max_iterations, double tolerance) {
  State s;
  s.u.assign(pr.p, 0.0);
  s.v.assign(pr.p, 0.0);
  double f = smooth(pr, s, lambda);
  double step = 1.0;
  State g, next;
  int it = 0;
  for (; it < max_iterations; ++it) {
    gradient(pr, s, lambda, g);
    double moved = 0.0;
    for (;;) {
      next.b0 = s.b0 - step * g.b0;
      next.u.resize(pr.p);
      next.v.resize(pr.p);
      double lin = (next.b0 - s.b0) * g.b0, quad = (next.b0 - s.b0) * (next.b0 - s.b0);
      for (std::size_t j = 0; j < pr.p; ++j) {
        next.u[j] = std::max(0.0, s.u[j] - step * g.u[j]);
        next.v[j] = std::max(0.0, s.v[j] - step * g.v[j]);
        const double du = next.u[j] - s.u[j], dv = next.v[j] - s.v[j];
        lin += du * g.u[j] + dv * g.v[j];
        quad += du * du + dv * dv;
      }
      const double fn = smooth(pr, next, lambda);
      if (fn <= f + lin + quad / (2.0 * step) || step < 1e-12) {
        moved = std::sqrt(quad);
        s = next;
        f = fn;
        break;
      }
      step *= 0.5;
    }
    step = std::min(1.0, step * 2.0);
    if (moved < tolerance) break;
  }
  LassoSolution out;
  out.intercept = s.b0;
  for (std::size_t j = 0; j < pr.p; ++j) out.coef.push_back(s.u[j] - s.v[j]);
  out.objective = pr.objective(out.intercept, out.coef, lambda);
  out.iterations = it;
  return out;
}

}  // namespace oracle
