#pragma once

#include <cmath>

namespace mavdes::detail {

// Compensated double-double scalar. Used by the analytic moment engine so
// that matrix entries spanning ten orders of magnitude (quadratic means on a
// wide dose range) come out correctly rounded.
struct Dd {
  double hi = 0.0;
  double lo = 0.0;

  Dd() = default;
  Dd(double x) : hi(x) {}
  Dd(double h, double l) : hi(h), lo(l) {}

  double value() const { return hi + lo; }
};

inline Dd two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  return {s, (a - (s - bb)) + (b - bb)};
}

// Requires |a| >= |b|.
inline Dd quick_two_sum(double a, double b) {
  const double s = a + b;
  return {s, b - (s - a)};
}

inline Dd two_prod(double a, double b) {
  const double p = a * b;
  return {p, std::fma(a, b, -p)};
}

inline Dd operator+(Dd a, Dd b) {
  Dd s = two_sum(a.hi, b.hi);
  return quick_two_sum(s.hi, s.lo + a.lo + b.lo);
}

inline Dd operator-(Dd a) { return {-a.hi, -a.lo}; }
inline Dd operator-(Dd a, Dd b) { return a + (-b); }

inline Dd operator*(Dd a, Dd b) {
  Dd p = two_prod(a.hi, b.hi);
  return quick_two_sum(p.hi, p.lo + a.hi * b.lo + a.lo * b.hi);
}

inline Dd operator/(Dd a, Dd b) {
  const double q1 = a.hi / b.hi;
  Dd r = a - b * Dd(q1);
  const double q2 = r.hi / b.hi;
  r = r - b * Dd(q2);
  const double q3 = r.hi / b.hi;
  return quick_two_sum(q1, q2) + Dd(q3);
}

inline Dd& operator+=(Dd& a, Dd b) { return a = a + b; }
inline Dd& operator-=(Dd& a, Dd b) { return a = a - b; }
inline Dd& operator*=(Dd& a, Dd b) { return a = a * b; }

}  // namespace mavdes::detail
