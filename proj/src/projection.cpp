#include "mavdes/projection.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "mavdes/nls.hpp"

namespace mavdes {

double kl_divergence(const CandidateModel& g, const CandidateModel& s,
                     const ApproximateDesign& design) {
  const double vg = g.sigma2, vs = s.sigma2;
  double acc = 0.0;
  for (int i = 0; i < design.size(); ++i) {
    const double x = design.points()[i];
    const double e = mean_value(g.kind, g.vartheta, x) - mean_value(s.kind, s.vartheta, x);
    acc += design.weights()[i] * (0.5 * std::log(vs / vg) + (vg + e * e) / (2.0 * vs) - 0.5);
  }
  return acc;
}

namespace {

// Design-weighted squared mean distance with its exact gradient and Hessian
// in vartheta.
struct SseEval {
  double sse = 0.0;
  Vector grad;
  Matrix hess;
};

SseEval weighted_sse(const CandidateModel& g, ModelKind kind, const Vector& vt,
                     const ApproximateDesign& design) {
  const int q = vartheta_size(kind);
  SseEval out;
  out.grad = Vector::Zero(q);
  out.hess = Matrix::Zero(q, q);
  for (int i = 0; i < design.size(); ++i) {
    const double x = design.points()[i];
    const double w = design.weights()[i];
    const MeanEval me = mean_eval(kind, vt, x);
    const double e = mean_value(g.kind, g.vartheta, x) - me.value;
    out.sse += w * e * e;
    out.grad -= 2.0 * w * e * me.grad;
    out.hess += 2.0 * w * (me.grad * me.grad.transpose() - e * me.hess);
  }
  return out;
}

// Full Newton steps on the weighted SSE. Gauss-Newton stalls at nonzero
// residuals, and the downstream first-order identities need the gradient at
// machine level.
Vector newton_polish(const CandidateModel& g, ModelKind kind, Vector vt,
                     const ApproximateDesign& design) {
  SseEval cur = weighted_sse(g, kind, vt, design);
  for (int it = 0; it < 12; ++it) {
    if (cur.grad.lpNorm<Eigen::Infinity>() == 0.0) break;
    Vector step = cur.hess.fullPivLu().solve(-cur.grad);
    if (!step.allFinite()) break;
    bool accepted = false;
    for (int bt = 0; bt < 6 && !accepted; ++bt) {
      Vector cand = vt + step;
      if (is_admissible(kind, cand, design.space())) {
        SseEval next = weighted_sse(g, kind, cand, design);
        if (next.grad.lpNorm<Eigen::Infinity>() < cur.grad.lpNorm<Eigen::Infinity>() &&
            next.sse <= cur.sse * (1.0 + 1e-10) + 1e-300) {
          vt = cand;
          cur = next;
          accepted = true;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return vt;
}

Projection finish(const CandidateModel& g, ModelKind kind, const Vector& vt,
                  const ApproximateDesign& design, bool solver_ok) {
  const int q = vartheta_size(kind);
  const SseEval se = weighted_sse(g, kind, vt, design);
  const double v_star = g.sigma2 + se.sse;

  Projection out;
  out.theta_star = Vector(q + 1);
  out.theta_star(0) = v_star;
  out.theta_star.tail(q) = vt;
  out.kl_value = 0.5 * std::log1p(se.sse / g.sigma2);

  // Design-weighted score expectation at theta_star; the sigma2 component is
  // zero by the profiling identity up to roundoff.
  double sig_score = -0.5 / v_star + (g.sigma2 + se.sse) / (2.0 * v_star * v_star);
  Vector score = Vector::Zero(q + 1);
  score(0) = sig_score;
  score.tail(q) = -se.grad / (2.0 * v_star);
  out.gradient_norm = score.lpNorm<Eigen::Infinity>();
  // The flag follows the stationarity criterion; boundary-stuck fits keep a
  // visible gradient regardless of what the solver reported.
  out.converged = out.gradient_norm <= 1e-8;
  (void)solver_ok;
  return out;
}

NlsProblem make_problem(const CandidateModel& g, ModelKind kind,
                        const ApproximateDesign& design) {
  const int q = vartheta_size(kind);
  const int k = design.size();
  std::vector<double> truth(k), sqw(k);
  for (int i = 0; i < k; ++i) {
    truth[i] = mean_value(g.kind, g.vartheta, design.points()[i]);
    sqw[i] = std::sqrt(design.weights()[i]);
  }
  NlsProblem prob;
  prob.dim = q;
  prob.residuals = k;
  prob.eval = [=, &design](const Vector& vt, Vector& r, Matrix* jac) {
    if (!is_admissible(kind, vt, design.space())) return false;
    for (int i = 0; i < k; ++i) {
      const MeanEval me = mean_eval(kind, vt, design.points()[i]);
      r(i) = sqw[i] * (truth[i] - me.value);
      if (jac) jac->row(i) = -sqw[i] * me.grad.transpose();
    }
    return true;
  };
  return prob;
}

const std::array<std::array<double, 3>, 8> kStartPatterns = {{
    {0, 0, 0},
    {+1, -1, +1},
    {-1, +1, -1},
    {+1, +1, -1},
    {-1, -1, +1},
    {+1, -1, -1},
    {-1, +1, +1},
    {+1, +1, +1},
}};

}  // namespace

Projection project(const CandidateModel& g, ModelKind s_kind, const Vector& start,
                   const ApproximateDesign& design, const ProjectOptions& opts) {
  const int q = vartheta_size(s_kind);
  if (start.size() != q) throw std::invalid_argument("projection start has wrong length");

  NlsProblem prob = make_problem(g, s_kind, design);
  NlsOptions nopts;
  nopts.max_iters = opts.max_iters;

  const int n_starts = opts.multistart ? static_cast<int>(kStartPatterns.size()) : 1;
  NlsResult best;
  best.sse = std::numeric_limits<double>::infinity();
  for (int si = 0; si < n_starts; ++si) {
    Vector x0 = start;
    for (int j = 0; j < q && j < 3; ++j) x0(j) *= 1.0 + 0.25 * kStartPatterns[si][j];
    if (!is_admissible(s_kind, x0, design.space())) continue;
    NlsResult r = levenberg_marquardt(prob, x0, nopts);
    if (r.sse < best.sse) best = r;
  }
  if (!std::isfinite(best.sse)) {
    // No admissible start worked; report the unpolished start as diverged.
    Projection out = finish(g, s_kind, start, design, false);
    out.converged = false;
    return out;
  }
  return finish(g, s_kind, newton_polish(g, s_kind, best.x, design), design, best.converged);
}

Projection project_warm(const CandidateModel& g, ModelKind s_kind, const Vector& warm,
                        const Vector& fallback, const ApproximateDesign& design) {
  NlsProblem prob = make_problem(g, s_kind, design);
  NlsResult best;
  best.sse = std::numeric_limits<double>::infinity();
  for (const Vector* x0 : {&warm, &fallback}) {
    if (x0->size() != prob.dim || !is_admissible(s_kind, *x0, design.space())) continue;
    NlsResult r = levenberg_marquardt(prob, *x0);
    if (r.sse < best.sse) best = r;
    // A tightly converged warm start needs no second solve.
    if (x0 == &warm && best.converged && best.grad_inf < 1e-13) break;
  }
  if (!std::isfinite(best.sse)) {
    Projection out = finish(g, s_kind, fallback, design, false);
    out.converged = false;
    return out;
  }
  return finish(g, s_kind, newton_polish(g, s_kind, best.x, design), design, best.converged);
}

}  // namespace mavdes
