#pragma once

#include "mavdes/core.hpp"
#include "mavdes/dd.hpp"
#include "mavdes/models.hpp"

namespace mavdes::detail {

// The Gaussian log-density derivatives are quadratic polynomials in the
// centered truth error Z = Y - m(x) ~ N(0, s2g). Expectations of single
// components and of products of two components are therefore exact in the
// first four central moments. All coefficient arithmetic happens in
// double-double, starting from the raw double inputs, so identities like the
// information-matrix equality A = -B survive rounding even for x^4-scale
// entries of the quadratic model.
struct ZPoly {
  Dd c0, c1, c2;
};

inline Dd zexpect(const ZPoly& p, double s2g) { return p.c0 + p.c2 * Dd(s2g); }

inline Dd zexpect_pair(const ZPoly& p, const ZPoly& q, double s2g) {
  const Dd s2(s2g);
  const Dd m4 = Dd(3.0) * s2 * s2;
  return p.c0 * q.c0 + (p.c0 * q.c2 + p.c1 * q.c1 + p.c2 * q.c0) * s2 + p.c2 * q.c2 * m4;
}

// Score/Hessian/third-derivative components of log f_s(y | x, theta) as
// ZPolys, for one candidate at one dose under a given truth mean.
class ScoreBasis {
 public:
  ScoreBasis(const CandidateModel& s, double truth_mean, double x)
      : me_(mean_eval(s.kind, s.vartheta, x)),
        q_(static_cast<int>(me_.grad.size())),
        v_(s.sigma2),
        v2_(v_ * v_),
        v3_(v2_ * v_),
        v4_(v2_ * v2_),
        a_(Dd(truth_mean) - Dd(me_.value)) {}

  int p() const { return q_ + 1; }
  double resid_bias() const { return a_.value(); }

  ZPoly score(int i) const {
    if (i == 0) return shifted(Dd(-0.5) / v_, Dd(0.0), Dd(0.5) / v2_);
    return shifted(Dd(0.0), Dd(me_.grad(i - 1)) / v_, Dd(0.0));
  }

  ZPoly hess(int i, int j) const {
    if (i == 0 && j == 0) return shifted(Dd(0.5) / v2_, Dd(0.0), Dd(-1.0) / v3_);
    if (i == 0) return shifted(Dd(0.0), Dd(-me_.grad(j - 1)) / v2_, Dd(0.0));
    if (j == 0) return shifted(Dd(0.0), Dd(-me_.grad(i - 1)) / v2_, Dd(0.0));
    return shifted(Dd(-me_.grad(i - 1)) * Dd(me_.grad(j - 1)) / v_,
                   Dd(me_.hess(i - 1, j - 1)) / v_, Dd(0.0));
  }

  ZPoly third(int i, int j, int k) const {
    int a = i, b = j, c = k;
    if (a > b) std::swap(a, b);
    if (b > c) std::swap(b, c);
    if (a > b) std::swap(a, b);
    if (c == 0) return shifted(Dd(-1.0) / v3_, Dd(0.0), Dd(3.0) / v4_);
    if (b == 0) return shifted(Dd(0.0), Dd(2.0 * me_.grad(c - 1)) / v3_, Dd(0.0));
    if (a == 0) {
      return shifted(Dd(me_.grad(b - 1)) * Dd(me_.grad(c - 1)) / v2_,
                     Dd(-me_.hess(b - 1, c - 1)) / v2_, Dd(0.0));
    }
    const int ai = a - 1, bj = b - 1, ck = c - 1;
    const Dd c0 = -(Dd(me_.grad(ai)) * Dd(me_.hess(bj, ck)) +
                    Dd(me_.grad(bj)) * Dd(me_.hess(ai, ck)) +
                    Dd(me_.grad(ck)) * Dd(me_.hess(ai, bj))) /
                  v_;
    return shifted(c0, Dd(me_.third(ai, bj, ck)) / v_, Dd(0.0));
  }

 private:
  // Rewrites a quadratic in e = y - eta as a quadratic in Z = e - a.
  ZPoly shifted(Dd c0, Dd c1, Dd c2) const {
    return ZPoly{c0 + c1 * a_ + c2 * a_ * a_, c1 + Dd(2.0) * c2 * a_, c2};
  }

  MeanEval me_;
  int q_;
  Dd v_, v2_, v3_, v4_;
  Dd a_;
};

}  // namespace mavdes::detail
