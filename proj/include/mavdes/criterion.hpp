#pragma once

#include <map>
#include <optional>

#include "mavdes/core.hpp"
#include "mavdes/models.hpp"
#include "mavdes/moments.hpp"
#include "mavdes/projection.hpp"

namespace mavdes {

// Everything the averaging-design criteria need: the prior over truths, the
// candidate families (with projection starting values), fixed averaging
// weights, the effective-dose target and the sample size in the 1/n variance
// term.
struct CriterionContext {
  TruthPrior prior;
  std::vector<CandidateModel> candidates;
  AveragingWeights weights;
  TargetED target;
  int n;

  CriterionContext(TruthPrior p, std::vector<CandidateModel> cands, AveragingWeights w,
                   TargetED t, int n_obs);
};

// Directional-derivative scan of the criterion over the design space.
// values hold d(x) = -dPhi/dalpha toward the one-point design at x; a
// minimizing design has d <= 0 everywhere and d = 0 on its support.
struct SensitivityReport {
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<bool> is_support;
  double max_violation = 0.0;
  std::vector<double> support_equalities;
  double criterion_value = 0.0;
};

// Evaluates the averaging-MSE criteria for one context. Owns warm-start
// caches for the per-design projections, so one evaluator should live per
// thread; all public methods recompute projections for the design they are
// given.
class CriterionEvaluator {
 public:
  explicit CriterionEvaluator(const CriterionContext& ctx);

  // Phi for a single truth: sigma_w^2/n + squared averaging bias.
  double mav(const ApproximateDesign& design, const CandidateModel& g);
  // Prior expectation Phi^pi.
  double bayes(const ApproximateDesign& design);
  // Sensitivity d(x); support points of the design evaluate near zero at an
  // optimal design.
  double sensitivity(const ApproximateDesign& design, double x);
  SensitivityReport verify(const ApproximateDesign& design, double grid_step);

  // Per-truth state behind the criterion, exposed for the derivative
  // machinery and for tests.
  struct AtomState {
    std::vector<Projection> projections;
    std::vector<CandidateModel> at_star;
    SandwichSet sw;
    std::vector<EdDerivs> mu;   // value/gradient/Hessian per candidate
    double mu_true = 0.0;
    double sigma_w2 = 0.0;
    double bias = 0.0;
    double phi = 0.0;
  };
  AtomState atom_state(const ApproximateDesign& design, const CandidateModel& g,
                       int warm_slot = -1);

  const CriterionContext& context() const { return ctx_; }

 private:
  double sensitivity_one(const AtomState& st, const CandidateModel& g,
                         const ApproximateDesign& design, double x) const;

  CriterionContext ctx_;
  // warm-start cache: (atom slot, candidate) -> last vartheta*
  std::map<std::pair<int, int>, Vector> warm_;
};

// Free-function forms of the individual operations.

// sigma_w^2 at given projections (theta*_s for every candidate).
double mav_variance(const CandidateModel& g, const std::vector<Projection>& projections,
                    const std::vector<CandidateModel>& candidates, const AveragingWeights& weights,
                    const ApproximateDesign& design, const TargetED& target);

double mav_mse(const CriterionContext& ctx, const CandidateModel& g,
               const ApproximateDesign& design);

double bayes_criterion(const CriterionContext& ctx, const ApproximateDesign& design);

// d theta*_s / d alpha along (1-alpha) xi + alpha delta_x at alpha = 0, for a
// candidate already evaluated at theta*_s(xi).
Vector theta_prime(const CandidateModel& g, const CandidateModel& s_at_star,
                   const ApproximateDesign& design, double x);

double sensitivity(const CriterionContext& ctx, const ApproximateDesign& design, double x);

SensitivityReport verify_optimality(const CriterionContext& ctx, const ApproximateDesign& design,
                                    double grid_step);

}  // namespace mavdes
