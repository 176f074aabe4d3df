#include "mavdes/criterion.hpp"

#include <cmath>
#include <limits>

#include "mavdes/gauss_moments.hpp"

namespace mavdes {

using detail::Dd;
using detail::ScoreBasis;

CriterionContext::CriterionContext(TruthPrior p, std::vector<CandidateModel> cands,
                                   AveragingWeights w, TargetED t, int n_obs)
    : prior(std::move(p)), candidates(std::move(cands)), weights(std::move(w)), target(t),
      n(n_obs) {
  if (weights.size() != static_cast<int>(candidates.size()))
    throw std::invalid_argument("one averaging weight per candidate required");
  if (n < 1) throw std::invalid_argument("sample size must be >= 1");
  for (const CandidateModel& c : candidates) check_admissible(c, target.space);
  for (const TruthPrior::Atom& a : prior.atoms) check_admissible(a.model, target.space);
}

CriterionEvaluator::CriterionEvaluator(const CriterionContext& ctx) : ctx_(ctx) {}

CriterionEvaluator::AtomState CriterionEvaluator::atom_state(const ApproximateDesign& design,
                                                             const CandidateModel& g,
                                                             int warm_slot) {
  const int r = static_cast<int>(ctx_.candidates.size());
  AtomState st;
  st.projections.reserve(r);
  st.at_star.reserve(r);
  st.mu.reserve(r);

  for (int s = 0; s < r; ++s) {
    const CandidateModel& cand = ctx_.candidates[s];
    Projection proj;
    if (warm_slot >= 0) {
      auto it = warm_.find({warm_slot, s});
      if (it != warm_.end()) {
        proj = project_warm(g, cand.kind, it->second, cand.vartheta, design);
      } else {
        proj = project(g, cand.kind, cand.vartheta, design);
      }
      warm_[{warm_slot, s}] = proj.vartheta();
    } else {
      proj = project(g, cand.kind, cand.vartheta, design);
    }
    if (!proj.converged) {
      throw std::runtime_error("projection did not converge for candidate " + cand.label() +
                               " under truth " + g.label());
    }
    st.projections.push_back(proj);
    st.at_star.emplace_back(cand.kind, proj.vartheta(), proj.sigma2());
    st.mu.push_back(ed_gradient(cand.kind, proj.vartheta(), ctx_.target));
  }

  st.sw = sandwich(g, st.at_star, design);
  st.mu_true = ed_alpha(g.kind, g.vartheta, ctx_.target);

  const Vector& w = ctx_.weights.w;
  double s2w = 0.0;
  double mu_bar = 0.0;
  for (int s = 0; s < r; ++s) {
    mu_bar += w(s) * st.mu[s].value;
    const Vector qs = st.sw.A_inv[s] * st.mu[s].grad;
    for (int t = 0; t < r; ++t) {
      const Vector qt = st.sw.A_inv[t] * st.mu[t].grad;
      s2w += w(s) * w(t) * qs.dot(st.sw.B[s][t] * qt);
    }
  }
  st.sigma_w2 = s2w;
  st.bias = mu_bar - st.mu_true;
  st.phi = s2w / ctx_.n + st.bias * st.bias;
  return st;
}

double CriterionEvaluator::mav(const ApproximateDesign& design, const CandidateModel& g) {
  return atom_state(design, g).phi;
}

double CriterionEvaluator::bayes(const ApproximateDesign& design) {
  double acc = 0.0;
  for (int a = 0; a < ctx_.prior.size(); ++a) {
    const TruthPrior::Atom& atom = ctx_.prior.atoms[a];
    acc += atom.prob * atom_state(design, atom.model, a).phi;
  }
  return acc;
}

namespace {

// Pointwise expectation of the score vector under g(.|x).
Vector expected_score_at(const CandidateModel& g, const CandidateModel& s, double x) {
  const ScoreBasis basis(s, mean_value(g.kind, g.vartheta, x), x);
  Vector b(basis.p());
  for (int i = 0; i < basis.p(); ++i) b(i) = detail::zexpect(basis.score(i), g.sigma2).value();
  return b;
}

// Pointwise A and B blocks for the one-point design at x.
Matrix pointwise_A(const CandidateModel& g, const CandidateModel& s, double x) {
  const ScoreBasis basis(s, mean_value(g.kind, g.vartheta, x), x);
  const int p = basis.p();
  Matrix A(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = i; j < p; ++j)
      A(i, j) = A(j, i) = detail::zexpect(basis.hess(i, j), g.sigma2).value();
  return A;
}

Matrix pointwise_B(const CandidateModel& g, const CandidateModel& s, const CandidateModel& t,
                   double x) {
  const double m = mean_value(g.kind, g.vartheta, x);
  const ScoreBasis bs(s, m, x);
  const ScoreBasis bt(t, m, x);
  Matrix B(bs.p(), bt.p());
  for (int i = 0; i < bs.p(); ++i)
    for (int j = 0; j < bt.p(); ++j)
      B(i, j) = detail::zexpect_pair(bs.score(i), bt.score(j), g.sigma2).value();
  return B;
}

}  // namespace

Vector theta_prime(const CandidateModel& g, const CandidateModel& s_at_star,
                   const ApproximateDesign& design, double x) {
  const Matrix A = matrix_A(g, s_at_star, design);
  const Matrix A_inv = guarded_inverse(A, "A[" + s_at_star.label() + "]");
  return -(A_inv * expected_score_at(g, s_at_star, x));
}

double CriterionEvaluator::sensitivity_one(const AtomState& st, const CandidateModel& g,
                                           const ApproximateDesign& design, double x) const {
  const int r = static_cast<int>(ctx_.candidates.size());
  const Vector& w = ctx_.weights.w;

  // theta'_s = -A_s^-1 E_{g(.|x)}[score_s]
  std::vector<Vector> thp(r);
  for (int s = 0; s < r; ++s)
    thp[s] = -(st.sw.A_inv[s] * expected_score_at(g, st.at_star[s], x));

  // h'_s: third-derivative contraction over the design, plus A(delta_x) - A(xi).
  std::vector<Matrix> hp(r);
  for (int s = 0; s < r; ++s) {
    const int p = theta_size(st.at_star[s].kind);
    std::vector<Dd> acc(static_cast<size_t>(p) * p);
    for (int i = 0; i < design.size(); ++i) {
      const double xp = design.points()[i];
      const Dd wp(design.weights()[i]);
      const ScoreBasis basis(st.at_star[s], mean_value(g.kind, g.vartheta, xp), xp);
      for (int a = 0; a < p; ++a) {
        for (int b = a; b < p; ++b) {
          Dd e;
          for (int k = 0; k < p; ++k)
            e += Dd(thp[s](k)) * detail::zexpect(basis.third(a, b, k), g.sigma2);
          acc[a * p + b] += wp * e;
        }
      }
    }
    Matrix M(p, p);
    for (int a = 0; a < p; ++a)
      for (int b = a; b < p; ++b) M(a, b) = M(b, a) = acc[a * p + b].value();
    hp[s] = M + pointwise_A(g, st.at_star[s], x) - st.sw.A[s];
  }

  // h'_st: fixed-direction coupling of Hessian and score, plus B(delta_x) - B(xi).
  std::vector<std::vector<Matrix>> hpb(r, std::vector<Matrix>(r));
  for (int s = 0; s < r; ++s) {
    for (int t = 0; t < r; ++t) {
      const int ps = theta_size(st.at_star[s].kind);
      const int pt = theta_size(st.at_star[t].kind);
      std::vector<Dd> acc(static_cast<size_t>(ps) * pt);
      for (int i = 0; i < design.size(); ++i) {
        const double xp = design.points()[i];
        const Dd wp(design.weights()[i]);
        const double m = mean_value(g.kind, g.vartheta, xp);
        const ScoreBasis bs(st.at_star[s], m, xp);
        const ScoreBasis bt(st.at_star[t], m, xp);
        for (int a = 0; a < ps; ++a) {
          for (int b = 0; b < pt; ++b) {
            Dd e;
            for (int k = 0; k < ps; ++k)
              e += Dd(thp[s](k)) *
                   detail::zexpect_pair(bs.hess(a, k), bt.score(b), g.sigma2);
            for (int k = 0; k < pt; ++k)
              e += Dd(thp[t](k)) *
                   detail::zexpect_pair(bs.score(a), bt.hess(b, k), g.sigma2);
            acc[a * pt + b] += wp * e;
          }
        }
      }
      Matrix M(ps, pt);
      for (int a = 0; a < ps; ++a)
        for (int b = 0; b < pt; ++b) M(a, b) = acc[a * pt + b].value();
      hpb[s][t] = M + pointwise_B(g, st.at_star[s], st.at_star[t], x) - st.sw.B[s][t];
    }
  }

  // Five-term derivative of sigma_w^2 along the design path.
  double sig = 0.0;
  for (int s = 0; s < r; ++s) {
    const Vector qs = st.sw.A_inv[s] * st.mu[s].grad;
    for (int t = 0; t < r; ++t) {
      const Vector qt = st.sw.A_inv[t] * st.mu[t].grad;
      const Vector r_st = st.sw.A_inv[s] * (st.sw.B[s][t] * qt);
      const double term1 = (st.mu[s].hess * thp[s]).dot(r_st);
      const double term2 = -qs.dot(hp[s] * r_st);
      const double term3 = qs.dot(hpb[s][t] * qt);
      const double term4 = -qs.dot(st.sw.B[s][t] * (st.sw.A_inv[t] * (hp[t] * qt)));
      const double term5 = qs.dot(st.sw.B[s][t] * (st.sw.A_inv[t] * (st.mu[t].hess * thp[t])));
      sig += w(s) * w(t) * (term1 + term2 + term3 + term4 + term5);
    }
  }

  double dbias = 0.0;
  for (int s = 0; s < r; ++s) dbias += w(s) * st.mu[s].grad.dot(thp[s]);
  return sig / ctx_.n + 2.0 * st.bias * dbias;
}

double CriterionEvaluator::sensitivity(const ApproximateDesign& design, double x) {
  double acc = 0.0;
  for (int a = 0; a < ctx_.prior.size(); ++a) {
    const TruthPrior::Atom& atom = ctx_.prior.atoms[a];
    const AtomState st = atom_state(design, atom.model, a);
    acc += atom.prob * sensitivity_one(st, atom.model, design, x);
  }
  return -acc;
}

SensitivityReport CriterionEvaluator::verify(const ApproximateDesign& design, double grid_step) {
  if (!(grid_step > 0.0)) throw std::invalid_argument("grid step must be positive");
  const DesignSpace& sp = ctx_.target.space;

  SensitivityReport rep;
  for (double x = sp.lower; x < sp.upper + 0.5 * grid_step; x += grid_step) {
    rep.grid.push_back(std::min(x, sp.upper));
    rep.is_support.push_back(false);
  }
  for (double x : design.points()) {
    rep.grid.push_back(x);
    rep.is_support.push_back(true);
  }

  // One pass over atoms, reusing the per-atom state across all grid points.
  rep.values.assign(rep.grid.size(), 0.0);
  double phi = 0.0;
  for (int a = 0; a < ctx_.prior.size(); ++a) {
    const TruthPrior::Atom& atom = ctx_.prior.atoms[a];
    const AtomState st = atom_state(design, atom.model, a);
    phi += atom.prob * st.phi;
    for (size_t i = 0; i < rep.grid.size(); ++i)
      rep.values[i] -= atom.prob * sensitivity_one(st, atom.model, design, rep.grid[i]);
  }
  rep.criterion_value = phi;

  rep.max_violation = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < rep.grid.size(); ++i) {
    rep.max_violation = std::max(rep.max_violation, rep.values[i]);
    if (rep.is_support[i]) rep.support_equalities.push_back(std::abs(rep.values[i]));
  }
  return rep;
}

double mav_variance(const CandidateModel& g, const std::vector<Projection>& projections,
                    const std::vector<CandidateModel>& candidates, const AveragingWeights& weights,
                    const ApproximateDesign& design, const TargetED& target) {
  const int r = static_cast<int>(candidates.size());
  if (static_cast<int>(projections.size()) != r || weights.size() != r)
    throw std::invalid_argument("candidates, projections and weights must align");

  std::vector<CandidateModel> at_star;
  at_star.reserve(r);
  for (int s = 0; s < r; ++s)
    at_star.emplace_back(candidates[s].kind, projections[s].vartheta(), projections[s].sigma2());
  const SandwichSet sw = sandwich(g, at_star, design);

  double acc = 0.0;
  std::vector<Vector> q(r);
  for (int s = 0; s < r; ++s) {
    const EdDerivs mu = ed_gradient(at_star[s].kind, at_star[s].vartheta, target);
    q[s] = sw.A_inv[s] * mu.grad;
  }
  for (int s = 0; s < r; ++s)
    for (int t = 0; t < r; ++t)
      acc += weights.w(s) * weights.w(t) * q[s].dot(sw.B[s][t] * q[t]);
  return acc;
}

double mav_mse(const CriterionContext& ctx, const CandidateModel& g,
               const ApproximateDesign& design) {
  CriterionEvaluator ev(ctx);
  return ev.mav(design, g);
}

double bayes_criterion(const CriterionContext& ctx, const ApproximateDesign& design) {
  CriterionEvaluator ev(ctx);
  return ev.bayes(design);
}

double sensitivity(const CriterionContext& ctx, const ApproximateDesign& design, double x) {
  CriterionEvaluator ev(ctx);
  return ev.sensitivity(design, x);
}

SensitivityReport verify_optimality(const CriterionContext& ctx, const ApproximateDesign& design,
                                    double grid_step) {
  CriterionEvaluator ev(ctx);
  return ev.verify(design, grid_step);
}

}  // namespace mavdes
