#include "mavdes/nls.hpp"

#include <cmath>
#include <limits>

#include "mavdes/models.hpp"

namespace mavdes {

namespace {

bool try_eval(const NlsProblem& p, const Vector& x, Vector& r, Matrix* jac) {
  try {
    if (!p.eval(x, r, jac)) return false;
  } catch (const std::exception&) {
    return false;
  }
  return r.allFinite() && (!jac || jac->allFinite());
}

}  // namespace

NlsResult levenberg_marquardt(const NlsProblem& problem, Vector x0, const NlsOptions& opts) {
  const int n = problem.dim;
  const int m = problem.residuals;
  Vector r(m);
  Matrix J(m, n);

  NlsResult out;
  out.x = x0;
  if (!try_eval(problem, x0, r, &J)) {
    out.sse = std::numeric_limits<double>::infinity();
    out.converged = false;
    return out;
  }
  double sse = r.squaredNorm();
  Vector g = J.transpose() * r;
  Matrix JtJ = J.transpose() * J;

  double lambda = 1e-3 * std::max(JtJ.diagonal().maxCoeff(), 1e-30);
  double nu = 2.0;
  bool small_grad = g.lpNorm<Eigen::Infinity>() <= opts.grad_tol;

  for (int iter = 0; iter < opts.max_iters && !small_grad; ++iter) {
    out.iters = iter + 1;
    Matrix M = JtJ;
    // Marquardt scaling keeps badly scaled parameter blocks moving.
    for (int i = 0; i < n; ++i) M(i, i) += lambda * std::max(JtJ(i, i), 1e-30);
    Vector step = M.ldlt().solve(-g);
    if (!step.allFinite()) {
      lambda *= nu;
      nu *= 2.0;
      continue;
    }
    Vector xn = out.x + step;
    Vector rn(m);
    Matrix Jn(m, n);
    const bool ok = try_eval(problem, xn, rn, &Jn);
    const double sse_new = ok ? rn.squaredNorm() : std::numeric_limits<double>::infinity();
    const double predicted = step.dot(lambda * step.cwiseProduct(JtJ.diagonal().cwiseMax(1e-30)) - g);
    const double rho = (sse - sse_new) / std::max(predicted, 1e-300);

    if (ok && sse_new < sse) {
      const double rel_step = step.norm() / std::max(1.0, out.x.norm());
      out.x = xn;
      r = rn;
      J = Jn;
      sse = sse_new;
      g = J.transpose() * r;
      JtJ = J.transpose() * J;
      lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3.0));
      nu = 2.0;
      if (g.lpNorm<Eigen::Infinity>() <= opts.grad_tol) small_grad = true;
      if (rel_step <= opts.step_tol) break;
    } else {
      lambda *= nu;
      nu *= 2.0;
      if (lambda > 1e16) break;
    }
  }

  // Gauss-Newton polish drives the gradient to machine level near a regular
  // minimum; steps that do not reduce the objective are discarded.
  for (int it = 0; it < opts.newton_polish; ++it) {
    Vector step = JtJ.ldlt().solve(-g);
    if (!step.allFinite()) break;
    Vector xn = out.x + step;
    Vector rn(m);
    Matrix Jn(m, n);
    if (!try_eval(problem, xn, rn, &Jn)) break;
    const double sse_new = rn.squaredNorm();
    Vector gn = Jn.transpose() * rn;
    if (sse_new <= sse * (1.0 + 1e-12) &&
        gn.lpNorm<Eigen::Infinity>() < g.lpNorm<Eigen::Infinity>()) {
      out.x = xn;
      r = rn;
      J = Jn;
      sse = sse_new;
      g = gn;
      JtJ = J.transpose() * J;
    } else {
      break;
    }
  }

  out.sse = sse;
  out.grad_inf = g.lpNorm<Eigen::Infinity>();
  out.converged = out.grad_inf <= std::max(opts.grad_tol, 1e-10 * (1.0 + sse));
  return out;
}

}  // namespace mavdes
