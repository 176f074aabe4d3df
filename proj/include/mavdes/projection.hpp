#pragma once

#include "mavdes/core.hpp"
#include "mavdes/models.hpp"

namespace mavdes {

// Best-approximating parameter of a candidate family under a design:
// theta_star = (sigma2*, vartheta*) minimizes the design-weighted
// Kullback-Leibler divergence from the truth. sigma2* is profiled in closed
// form; gradient_norm is the design-weighted score expectation at the result.
struct Projection {
  Vector theta_star;
  double kl_value = 0.0;
  bool converged = false;
  double gradient_norm = 0.0;

  Vector vartheta() const { return theta_star.tail(theta_star.size() - 1); }
  double sigma2() const { return theta_star(0); }
};

// Design-weighted KL divergence between two Gaussian regression models
// (closed Gaussian form).
double kl_divergence(const CandidateModel& g, const CandidateModel& s,
                     const ApproximateDesign& design);

struct ProjectOptions {
  int max_iters = 200;
  // Deterministic multistart: the start vector plus +-25% sign patterns.
  bool multistart = true;
};

Projection project(const CandidateModel& g, ModelKind s_kind, const Vector& start,
                   const ApproximateDesign& design, const ProjectOptions& opts = {});

// Single warm start with the canonical start as fallback; used inside
// optimizer loops where the previous evaluation is a good initial point.
Projection project_warm(const CandidateModel& g, ModelKind s_kind, const Vector& warm,
                        const Vector& fallback, const ApproximateDesign& design);

}  // namespace mavdes
