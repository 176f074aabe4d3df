#pragma once

#include "mavdes/core.hpp"

namespace mavdes {

// Dense symmetric rank-3 tensor, sized p x p x p.
class Tensor3 {
 public:
  explicit Tensor3(int n) : n_(n), v_(static_cast<size_t>(n) * n * n, 0.0) {}
  double& operator()(int i, int j, int k) { return v_[(static_cast<size_t>(i) * n_ + j) * n_ + k]; }
  double operator()(int i, int j, int k) const {
    return v_[(static_cast<size_t>(i) * n_ + j) * n_ + k];
  }
  int dim() const { return n_; }
  // Writes v to all six index permutations.
  void set_sym(int i, int j, int k, double v);

 private:
  int n_;
  std::vector<double> v_;
};

// Mean-function value with derivatives at a single dose: grad/hess/third are
// in vartheta, dx/dgrad_dx/dxx are the x-derivatives needed by the
// effective-dose chain rule.
struct MeanEval {
  double value = 0.0;
  Vector grad;
  Matrix hess;
  Tensor3 third;
  double dx = 0.0;
  Vector dgrad_dx;
  double dxx = 0.0;

  explicit MeanEval(int q) : grad(q), hess(q, q), third(q), dgrad_dx(q) {
    grad.setZero();
    hess.setZero();
    dgrad_dx.setZero();
  }
};

MeanEval mean_eval(ModelKind kind, const Vector& vartheta, double x);
double mean_value(ModelKind kind, const Vector& vartheta, double x);

// Derivatives of log f(y | x, theta) for the Gaussian density, theta =
// (sigma2, vartheta). score/hess/third are exact analytic expressions.
struct LogDensityDerivs {
  Vector score;
  Matrix hess;
  Tensor3 third;

  explicit LogDensityDerivs(int p) : score(p), hess(p, p), third(p) {
    score.setZero();
    hess.setZero();
  }
};

LogDensityDerivs log_density_derivs(const CandidateModel& model, double x, double y);

// Smallest dose at which the mean reaches a fraction alpha of the effect
// eta(b)-eta(a); located by a 512-cell scan followed by bisection.
double ed_alpha(ModelKind kind, const Vector& vartheta, const TargetED& target);

// Gradient and Hessian of the effective dose in theta = (sigma2, vartheta)
// by implicit differentiation; the sigma2 row/column is identically zero.
struct EdDerivs {
  double value = 0.0;
  Vector grad;
  Matrix hess;
};

EdDerivs ed_gradient(ModelKind kind, const Vector& vartheta, const TargetED& target);

}  // namespace mavdes
