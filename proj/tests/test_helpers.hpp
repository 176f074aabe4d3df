#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "mavdes/core.hpp"
#include "mavdes/models.hpp"

namespace mavdes::testing {

inline DesignSpace dose_space() { return DesignSpace(0.0, 150.0); }

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

// Reference dose-response parameterizations used throughout the tests.
inline CandidateModel log_linear_ref(double s2 = 0.1) {
  return CandidateModel(ModelKind::LogLinear, vec({0.0, 0.0797, 1.0}), s2);
}
inline CandidateModel emax_ref(double s2 = 0.1) {
  return CandidateModel(ModelKind::Emax, vec({0.0, 0.467, 25.0}), s2);
}
inline CandidateModel exponential_ref(double s2 = 0.1) {
  return CandidateModel(ModelKind::Exponential, vec({-0.08265, 0.08265, 85.0}), s2);
}
inline CandidateModel quadratic_ref(double s2 = 0.1) {
  return CandidateModel(ModelKind::Quadratic, vec({0.0, 0.00533, -0.00002}), s2);
}

inline CandidateModel ref_model(ModelKind k, double s2 = 0.1) {
  switch (k) {
    case ModelKind::Constant: return CandidateModel(ModelKind::Constant, vec({0.2}), s2);
    case ModelKind::Linear: return CandidateModel(ModelKind::Linear, vec({0.05, 0.003}), s2);
    case ModelKind::LogLinear: return log_linear_ref(s2);
    case ModelKind::Emax: return emax_ref(s2);
    case ModelKind::Exponential: return exponential_ref(s2);
    case ModelKind::Quadratic: return quadratic_ref(s2);
  }
  throw std::logic_error("unreachable");
}

// The six-dose uniform design used as the comparison design in simulations.
inline ApproximateDesign uniform_six() {
  return ApproximateDesign({0, 10, 25, 50, 100, 150},
                           {1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6}, dose_space());
}

struct CaseRng {
  std::mt19937_64 eng;
  explicit CaseRng(std::uint64_t seed) : eng(seed) {}
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(eng);
  }
  int pick(int n) { return static_cast<int>(std::uniform_int_distribution<int>(0, n - 1)(eng)); }
};

// Random model: a reference parameterization jittered within +-20%, variance
// in [0.05, 0.2]. Stays well inside the admissible region.
inline CandidateModel random_model(CaseRng& rng, bool all_kinds = true) {
  static const ModelKind kinds[] = {ModelKind::Constant,  ModelKind::Linear,
                                    ModelKind::LogLinear, ModelKind::Emax,
                                    ModelKind::Exponential, ModelKind::Quadratic};
  const ModelKind k = kinds[all_kinds ? rng.pick(6) : 2 + rng.pick(4)];
  CandidateModel base = ref_model(k);
  Vector vt = base.vartheta;
  for (int i = 0; i < vt.size(); ++i) {
    vt(i) *= rng.uniform(0.8, 1.2);
    if (vt(i) == 0.0) vt(i) = rng.uniform(-0.05, 0.05);
  }
  if ((k == ModelKind::LogLinear || k == ModelKind::Emax) && vt(2) < 0.5) vt(2) = 0.5;
  return CandidateModel(k, vt, rng.uniform(0.05, 0.2));
}

// Random design with separated points and non-negligible weights, so the
// regularity guards stay quiet.
inline ApproximateDesign random_design(CaseRng& rng, int k_min = 4, int k_max = 6) {
  const int k = k_min + rng.pick(k_max - k_min + 1);
  std::vector<double> pts;
  while (static_cast<int>(pts.size()) < k) {
    const double x = rng.uniform(0.0, 150.0);
    bool ok = true;
    for (double p : pts) ok = ok && std::abs(p - x) > 8.0;
    if (ok) pts.push_back(x);
  }
  std::vector<double> wts(k);
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    wts[i] = 0.5 + rng.uniform(0.0, 1.0);
    total += wts[i];
  }
  for (double& w : wts) w /= total;
  return ApproximateDesign(std::move(pts), std::move(wts), dose_space());
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace mavdes::testing
