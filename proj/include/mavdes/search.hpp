#pragma once

#include <functional>

#include "mavdes/core.hpp"

namespace mavdes {

// Derivative-free minimization kernels over a convex feasible set given by a
// Euclidean projection operator. Both kernels are deterministic.

using Objective = std::function<double(const Vector&)>;
using Projector = std::function<Vector(const Vector&)>;

struct SearchOptions {
  double rho_begin = 0.1;
  double rho_end = 1e-7;
  long max_evals = 5000;
};

struct SearchResult {
  Vector x;
  double f = 0.0;
  long evals = 0;
  bool converged = false;
};

// Linear-approximation trust-region method: a simplex of interpolation
// points supplies a linear model of the objective, the step minimizes the
// model inside the trust radius subject to the exact (linear) feasible set,
// and the radius shrinks when model steps stop paying off.
SearchResult cobyla_lite(const Objective& f, const Vector& start, const Projector& project,
                         const SearchOptions& opts);

// Nelder-Mead with projection of every trial point onto the feasible set and
// two shrinking restarts around the incumbent.
SearchResult nelder_mead(const Objective& f, const Vector& start, const Projector& project,
                         const SearchOptions& opts);

// Euclidean projection onto { w >= 0, sum w <= 1 }.
void project_weight_block(double* w, int n);

}  // namespace mavdes
