#include "mavdes/moments.hpp"

#include "mavdes/gauss_moments.hpp"

namespace mavdes {

using detail::Dd;
using detail::ScoreBasis;

Matrix matrix_A(const CandidateModel& g, const CandidateModel& s,
                const ApproximateDesign& design) {
  const int p = theta_size(s.kind);
  std::vector<Dd> acc(static_cast<size_t>(p) * p);
  for (int i = 0; i < design.size(); ++i) {
    const double x = design.points()[i];
    const Dd w(design.weights()[i]);
    const ScoreBasis basis(s, mean_value(g.kind, g.vartheta, x), x);
    for (int r = 0; r < p; ++r)
      for (int c = r; c < p; ++c)
        acc[r * p + c] += w * detail::zexpect(basis.hess(r, c), g.sigma2);
  }
  Matrix A(p, p);
  for (int r = 0; r < p; ++r)
    for (int c = r; c < p; ++c) A(r, c) = A(c, r) = acc[r * p + c].value();
  return A;
}

Matrix matrix_B(const CandidateModel& g, const CandidateModel& s, const CandidateModel& t,
                const ApproximateDesign& design) {
  const int ps = theta_size(s.kind), pt = theta_size(t.kind);
  std::vector<Dd> acc(static_cast<size_t>(ps) * pt);
  for (int i = 0; i < design.size(); ++i) {
    const double x = design.points()[i];
    const Dd w(design.weights()[i]);
    const double m = mean_value(g.kind, g.vartheta, x);
    const ScoreBasis bs(s, m, x);
    const ScoreBasis bt(t, m, x);
    for (int r = 0; r < ps; ++r)
      for (int c = 0; c < pt; ++c)
        acc[r * pt + c] += w * detail::zexpect_pair(bs.score(r), bt.score(c), g.sigma2);
  }
  Matrix B(ps, pt);
  for (int r = 0; r < ps; ++r)
    for (int c = 0; c < pt; ++c) B(r, c) = acc[r * pt + c].value();
  return B;
}

double rcond_estimate(const Matrix& m) {
  Eigen::FullPivLU<Matrix> lu(m);
  if (!lu.isInvertible()) return 0.0;
  const Matrix inv = lu.inverse();
  const double n1 = m.cwiseAbs().colwise().sum().maxCoeff();
  const double n2 = inv.cwiseAbs().colwise().sum().maxCoeff();
  return 1.0 / (n1 * n2);
}

Matrix guarded_inverse(const Matrix& m, const std::string& what) {
  const double rc = rcond_estimate(m);
  if (rc < 1e-12) {
    throw std::runtime_error("regularity violated: " + what +
                             " is singular or ill-conditioned (rcond < 1e-12)");
  }
  return m.fullPivLu().inverse();
}

SandwichSet sandwich(const CandidateModel& g, const std::vector<CandidateModel>& candidates,
                     const ApproximateDesign& design) {
  const int r = static_cast<int>(candidates.size());
  if (r == 0) throw std::invalid_argument("sandwich needs at least one candidate");

  SandwichSet sw;
  sw.A.reserve(r);
  sw.A_inv.reserve(r);
  sw.B.assign(r, std::vector<Matrix>(r));
  sw.offsets.assign(r, 0);

  int total = 0;
  for (int s = 0; s < r; ++s) {
    sw.offsets[s] = total;
    total += theta_size(candidates[s].kind);
  }
  for (int s = 0; s < r; ++s) {
    sw.A.push_back(matrix_A(g, candidates[s], design));
    sw.A_inv.push_back(guarded_inverse(sw.A[s], "A[" + candidates[s].label() + "]"));
  }
  for (int s = 0; s < r; ++s) {
    for (int t = s; t < r; ++t) {
      sw.B[s][t] = matrix_B(g, candidates[s], candidates[t], design);
      if (t != s) sw.B[t][s] = sw.B[s][t].transpose();
    }
    guarded_inverse(sw.B[s][s], "B[" + candidates[s].label() + "]");
  }
  sw.Sigma = Matrix::Zero(total, total);
  for (int s = 0; s < r; ++s) {
    const int ps = theta_size(candidates[s].kind);
    for (int t = 0; t < r; ++t) {
      const int pt = theta_size(candidates[t].kind);
      sw.Sigma.block(sw.offsets[s], sw.offsets[t], ps, pt) =
          sw.A_inv[s] * sw.B[s][t] * sw.A_inv[t];
    }
  }
  return sw;
}

}  // namespace mavdes
