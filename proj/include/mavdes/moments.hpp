#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "mavdes/core.hpp"
#include "mavdes/models.hpp"

namespace mavdes {

// Gauss-Hermite rule for the physicists' weight exp(-t^2). Nodes by Newton
// iteration on the orthonormal recurrence, so the same code serves double and
// long double instantiations.
template <class Real>
struct GaussHermiteRule {
  std::vector<Real> nodes;
  std::vector<Real> weights;
};

template <class Real = double>
GaussHermiteRule<Real> gauss_hermite(int n) {
  if (n < 2) throw std::invalid_argument("gauss_hermite needs at least 2 nodes");
  GaussHermiteRule<Real> rule;
  rule.nodes.assign(n, Real(0));
  rule.weights.assign(n, Real(0));
  const Real pi_m4 = Real(1) / std::sqrt(std::sqrt(Real(3.14159265358979323846264338327950288L)));

  const int half = (n + 1) / 2;
  Real z = Real(0);
  for (int i = 0; i < half; ++i) {
    // Standard initial guesses, largest root first.
    if (i == 0) {
      z = std::sqrt(Real(2 * n + 1)) - Real(1.85575) * std::pow(Real(2 * n + 1), Real(-1.0 / 6.0));
    } else if (i == 1) {
      z -= Real(1.14) * std::pow(Real(n), Real(0.426)) / z;
    } else if (i == 2) {
      z = Real(1.86) * z - Real(0.86) * rule.nodes[0];
    } else if (i == 3) {
      z = Real(1.91) * z - Real(0.91) * rule.nodes[1];
    } else {
      z = Real(2) * z - rule.nodes[i - 2];
    }
    Real pp = Real(0);
    for (int iter = 0; iter < 100; ++iter) {
      Real p1 = pi_m4, p2 = Real(0);
      for (int j = 1; j <= n; ++j) {
        const Real p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(Real(2) / Real(j)) * p2 - std::sqrt(Real(j - 1) / Real(j)) * p3;
      }
      pp = std::sqrt(Real(2) * Real(n)) * p2;
      const Real dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) <= std::numeric_limits<Real>::epsilon() * (Real(1) + std::abs(z))) break;
    }
    rule.nodes[i] = z;
    rule.nodes[n - 1 - i] = -z;
    rule.weights[i] = Real(2) / (pp * pp);
    rule.weights[n - 1 - i] = rule.weights[i];
  }
  // Ascending order.
  std::reverse(rule.nodes.begin(), rule.nodes.end());
  std::reverse(rule.weights.begin(), rule.weights.end());
  return rule;
}

// E[f(Y)] for Y ~ Normal(mean, variance) by Gauss-Hermite quadrature.
// Throws when the integrand is non-finite at a node.
template <class Real = double, class F>
Real expect_gaussian(F&& integrand, Real mean, Real variance, int nodes) {
  if (!(variance > Real(0))) throw std::invalid_argument("variance must be positive");
  static const Real inv_sqrt_pi = Real(1) / std::sqrt(Real(3.14159265358979323846264338327950288L));
  const GaussHermiteRule<Real> rule = gauss_hermite<Real>(nodes);
  const Real s = std::sqrt(Real(2) * variance);
  Real acc = Real(0);
  for (int i = 0; i < nodes; ++i) {
    const Real y = mean + s * rule.nodes[i];
    const Real fy = integrand(y);
    if (!std::isfinite(static_cast<double>(fy))) {
      std::ostringstream os;
      os << "integrand not finite at quadrature node y=" << static_cast<double>(y);
      throw std::runtime_error(os.str());
    }
    acc += rule.weights[i] * fy;
  }
  return acc * inv_sqrt_pi;
}

// Sandwich matrices for one candidate set under a design:
//   A[s]      expected log-density Hessian, design weighted
//   B[s][t]   expected score cross products
//   Sigma     block matrix with blocks A_s^-1 B_st A_t^-1
// All expectations are under the truth g; candidates come evaluated at their
// projected parameters.
struct SandwichSet {
  std::vector<Matrix> A;
  std::vector<Matrix> A_inv;
  std::vector<std::vector<Matrix>> B;
  Matrix Sigma;
  std::vector<int> offsets;  // block offsets into Sigma, one per candidate
};

Matrix matrix_A(const CandidateModel& g, const CandidateModel& s, const ApproximateDesign& design);
Matrix matrix_B(const CandidateModel& g, const CandidateModel& s, const CandidateModel& t,
                const ApproximateDesign& design);

SandwichSet sandwich(const CandidateModel& g, const std::vector<CandidateModel>& candidates,
                     const ApproximateDesign& design);

// Reciprocal condition estimate used for the sandwich regularity guard.
double rcond_estimate(const Matrix& m);

// Inverts A_s (or B_ss) with the 1e-12 rcond guard; throws naming the
// candidate when the regularity assumption fails.
Matrix guarded_inverse(const Matrix& m, const std::string& what);

}  // namespace mavdes
