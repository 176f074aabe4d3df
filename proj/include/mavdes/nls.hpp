#pragma once

#include <functional>

#include "mavdes/core.hpp"

namespace mavdes {

// Weighted nonlinear least squares, r(x) in R^m, minimize |r|^2.
// eval fills residuals (and the Jacobian when requested) and returns false
// for inadmissible parameters; such steps are rejected by backtracking.
struct NlsProblem {
  int dim = 0;
  int residuals = 0;
  std::function<bool(const Vector& x, Vector& r, Matrix* jac)> eval;
};

struct NlsOptions {
  int max_iters = 200;
  double grad_tol = 1e-12;   // infinity norm of J^T r
  double step_tol = 1e-14;   // relative step size
  int newton_polish = 3;     // full Gauss-Newton steps after convergence
};

struct NlsResult {
  Vector x;
  double sse = 0.0;
  double grad_inf = 0.0;
  bool converged = false;
  int iters = 0;
};

NlsResult levenberg_marquardt(const NlsProblem& problem, Vector x0,
                              const NlsOptions& opts = {});

// Full Newton refinement of a weighted mean fit: minimizes
// sum_i w_i (target_i - eta_kind(x_i, vt))^2 with exact derivatives.
// Gauss-Newton style solvers stall at nonzero residuals; this drives the
// gradient to machine level near a regular minimum.
struct WeightedFitPolish {
  Vector vartheta;
  double sse = 0.0;
  double grad_inf = 0.0;
};

WeightedFitPolish polish_weighted_fit(ModelKind kind, Vector vt, const std::vector<double>& x,
                                      const std::vector<double>& w,
                                      const std::vector<double>& target,
                                      const DesignSpace& space);

}  // namespace mavdes
