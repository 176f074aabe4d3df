#include "mavdes/models.hpp"

#include <cmath>

namespace mavdes {

void Tensor3::set_sym(int i, int j, int k, double v) {
  (*this)(i, j, k) = v;
  (*this)(i, k, j) = v;
  (*this)(j, i, k) = v;
  (*this)(j, k, i) = v;
  (*this)(k, i, j) = v;
  (*this)(k, j, i) = v;
}

double mean_value(ModelKind kind, const Vector& t, double x) {
  switch (kind) {
    case ModelKind::Constant:
      return t(0);
    case ModelKind::Linear:
      return t(0) + t(1) * x;
    case ModelKind::LogLinear: {
      const double u = x + t(2);
      if (u <= 0.0) throw std::domain_error("log_linear mean undefined: x + vartheta3 <= 0");
      return t(0) + t(1) * std::log(u);
    }
    case ModelKind::Emax: {
      const double d = t(2) + x;
      if (d == 0.0) throw std::domain_error("emax mean undefined: vartheta3 + x = 0");
      return t(0) + t(1) * x / d;
    }
    case ModelKind::Exponential: {
      if (t(2) == 0.0) throw std::domain_error("exponential mean undefined: vartheta3 = 0");
      return t(0) + t(1) * std::exp(x / t(2));
    }
    case ModelKind::Quadratic:
      return t(0) + t(1) * x + t(2) * x * x;
  }
  throw std::logic_error("unreachable");
}

MeanEval mean_eval(ModelKind kind, const Vector& t, double x) {
  MeanEval e(vartheta_size(kind));
  switch (kind) {
    case ModelKind::Constant:
      e.value = t(0);
      e.grad(0) = 1.0;
      return e;
    case ModelKind::Linear:
      e.value = t(0) + t(1) * x;
      e.grad << 1.0, x;
      e.dx = t(1);
      e.dgrad_dx(1) = 1.0;
      return e;
    case ModelKind::LogLinear: {
      const double u = x + t(2);
      if (u <= 0.0) throw std::domain_error("log_linear mean undefined: x + vartheta3 <= 0");
      const double L = std::log(u);
      e.value = t(0) + t(1) * L;
      e.grad << 1.0, L, t(1) / u;
      e.hess(1, 2) = e.hess(2, 1) = 1.0 / u;
      e.hess(2, 2) = -t(1) / (u * u);
      e.third.set_sym(1, 2, 2, -1.0 / (u * u));
      e.third.set_sym(2, 2, 2, 2.0 * t(1) / (u * u * u));
      e.dx = t(1) / u;
      e.dgrad_dx << 0.0, 1.0 / u, -t(1) / (u * u);
      e.dxx = -t(1) / (u * u);
      return e;
    }
    case ModelKind::Emax: {
      const double d = t(2) + x;
      if (d == 0.0) throw std::domain_error("emax mean undefined: vartheta3 + x = 0");
      const double d2 = d * d, d3 = d2 * d, d4 = d2 * d2;
      e.value = t(0) + t(1) * x / d;
      e.grad << 1.0, x / d, -t(1) * x / d2;
      e.hess(1, 2) = e.hess(2, 1) = -x / d2;
      e.hess(2, 2) = 2.0 * t(1) * x / d3;
      e.third.set_sym(1, 2, 2, 2.0 * x / d3);
      e.third.set_sym(2, 2, 2, -6.0 * t(1) * x / d4);
      e.dx = t(1) * t(2) / d2;
      e.dgrad_dx << 0.0, t(2) / d2, -t(1) * (t(2) - x) / d3;
      e.dxx = -2.0 * t(1) * t(2) / d3;
      return e;
    }
    case ModelKind::Exponential: {
      const double c = t(2);
      if (c == 0.0) throw std::domain_error("exponential mean undefined: vartheta3 = 0");
      const double u = std::exp(x / c);
      const double c2 = c * c, c3 = c2 * c, c4 = c2 * c2;
      e.value = t(0) + t(1) * u;
      e.grad << 1.0, u, -t(1) * x * u / c2;
      e.hess(1, 2) = e.hess(2, 1) = -x * u / c2;
      e.hess(2, 2) = t(1) * x * u * (x + 2.0 * c) / c4;
      e.third.set_sym(1, 2, 2, x * u * (x + 2.0 * c) / c4);
      e.third.set_sym(2, 2, 2, -t(1) * x * u * (x * x + 6.0 * x * c + 6.0 * c2) / (c4 * c2));
      e.dx = t(1) * u / c;
      e.dgrad_dx << 0.0, u / c, -t(1) * u * (c + x) / c3;
      e.dxx = t(1) * u / c2;
      return e;
    }
    case ModelKind::Quadratic:
      e.value = t(0) + t(1) * x + t(2) * x * x;
      e.grad << 1.0, x, x * x;
      e.dx = t(1) + 2.0 * t(2) * x;
      e.dgrad_dx << 0.0, 1.0, 2.0 * x;
      e.dxx = 2.0 * t(2);
      return e;
  }
  throw std::logic_error("unreachable");
}

LogDensityDerivs log_density_derivs(const CandidateModel& model, double x, double y) {
  const MeanEval me = mean_eval(model.kind, model.vartheta, x);
  const int q = static_cast<int>(me.grad.size());
  const int p = q + 1;
  const double v = model.sigma2;
  const double v2 = v * v, v3 = v2 * v, v4 = v2 * v2;
  const double e = y - me.value;

  LogDensityDerivs d(p);
  d.score(0) = -0.5 / v + e * e / (2.0 * v2);
  d.hess(0, 0) = 0.5 / v2 - e * e / v3;
  d.third(0, 0, 0) = -1.0 / v3 + 3.0 * e * e / v4;
  for (int j = 0; j < q; ++j) {
    d.score(1 + j) = e * me.grad(j) / v;
    d.hess(0, 1 + j) = d.hess(1 + j, 0) = -e * me.grad(j) / v2;
    d.third.set_sym(0, 0, 1 + j, 2.0 * e * me.grad(j) / v3);
    for (int k = 0; k < q; ++k) {
      d.hess(1 + j, 1 + k) = (-me.grad(j) * me.grad(k) + e * me.hess(j, k)) / v;
      d.third.set_sym(0, 1 + j, 1 + k, (me.grad(j) * me.grad(k) - e * me.hess(j, k)) / v2);
      for (int l = k; l < q; ++l) {
        const double val = (-me.grad(j) * me.hess(k, l) - me.grad(k) * me.hess(j, l) -
                            me.grad(l) * me.hess(j, k) + e * me.third(j, k, l)) /
                           v;
        d.third.set_sym(1 + j, 1 + k, 1 + l, val);
      }
    }
  }
  return d;
}

namespace {

constexpr int kScanCells = 512;
constexpr double kBisectRel = 1e-10;

// Fraction of the effect reached at x, minus alpha.
double ed_defect(ModelKind kind, const Vector& t, double x, double eta_a, double denom,
                 double alpha) {
  return (mean_value(kind, t, x) - eta_a) / denom - alpha;
}

}  // namespace

double ed_alpha(ModelKind kind, const Vector& t, const TargetED& target) {
  const double a = target.space.lower, b = target.space.upper;
  const double eta_a = mean_value(kind, t, a);
  const double eta_b = mean_value(kind, t, b);
  const double denom = eta_b - eta_a;
  if (denom == 0.0) throw std::domain_error("effective dose undefined: eta(b) = eta(a)");

  // First crossing of the threshold; quadratic means can cross more than once.
  double lo = a;
  double q_lo = -target.alpha;
  double hi = a;
  bool found = false;
  for (int j = 1; j <= kScanCells; ++j) {
    hi = a + (b - a) * j / kScanCells;
    const double q_hi = ed_defect(kind, t, hi, eta_a, denom, target.alpha);
    if (q_hi >= 0.0) {
      found = true;
      break;
    }
    lo = hi;
    q_lo = q_hi;
  }
  (void)q_lo;
  if (!found) throw std::runtime_error("effective dose target not attained on the design space");

  const double tol = kBisectRel * (b - a);
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (ed_defect(kind, t, mid, eta_a, denom, target.alpha) >= 0.0)
      hi = mid;
    else
      lo = mid;
  }
  // Newton polish near the bracket; the implicit-function derivatives
  // downstream need the root at machine accuracy. The root may sit within
  // rounding of a bracket edge, so steps get a few tolerances of slack.
  const double slack = 10.0 * tol;
  const double plo = std::max(a, lo - slack), phi = std::min(b, hi + slack);
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 6; ++it) {
    const MeanEval me = mean_eval(kind, t, x);
    const double q = (me.value - eta_a) / denom - target.alpha;
    const double dq = me.dx / denom;
    if (dq == 0.0) break;
    const double step = q / dq;
    const double xn = x - step;
    if (xn < plo || xn > phi) break;
    x = xn;
    if (std::abs(step) <= 1e-15 * (b - a)) break;
  }
  return x;
}

EdDerivs ed_gradient(ModelKind kind, const Vector& t, const TargetED& target) {
  const double a = target.space.lower, b = target.space.upper;
  const double alpha = target.alpha;
  const double x0 = ed_alpha(kind, t, target);

  const MeanEval ex = mean_eval(kind, t, x0);
  const MeanEval ea = mean_eval(kind, t, a);
  const MeanEval eb = mean_eval(kind, t, b);
  const int q = static_cast<int>(ex.grad.size());
  const int p = q + 1;

  // h(x, vartheta) = eta(x) - eta(a) - alpha (eta(b) - eta(a)) vanishes at x0.
  const double hx = ex.dx;
  const double scale = std::max({std::abs(ea.dx), std::abs(eb.dx), std::abs(ex.dx), 1e-300});
  if (std::abs(hx) <= 1e-10 * scale) {
    throw std::runtime_error("non-regular effective dose: mean is stationary at the target");
  }

  Vector hth = ex.grad - ea.grad - alpha * (eb.grad - ea.grad);
  Vector mu_vt = -hth / hx;

  // One more implicit-differentiation level for the vartheta Hessian.
  Matrix hthth = ex.hess - ea.hess - alpha * (eb.hess - ea.hess);
  Matrix H(q, q);
  for (int j = 0; j < q; ++j) {
    for (int k = 0; k < q; ++k) {
      H(j, k) = -(ex.dxx * mu_vt(j) * mu_vt(k) + ex.dgrad_dx(k) * mu_vt(j) +
                  ex.dgrad_dx(j) * mu_vt(k) + hthth(j, k)) /
                hx;
    }
  }

  EdDerivs out;
  out.value = x0;
  out.grad = Vector::Zero(p);
  out.grad.tail(q) = mu_vt;
  out.hess = Matrix::Zero(p, p);
  out.hess.bottomRightCorner(q, q) = H;
  return out;
}

}  // namespace mavdes
