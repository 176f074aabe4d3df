#include "mavdes/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace mavdes {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

DesignSpace::DesignSpace(double lo, double hi) : lower(lo), upper(hi) {
  require(std::isfinite(lo) && std::isfinite(hi), "design space bounds must be finite");
  require(lo < hi, "design space needs lower < upper");
}

const char* kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Constant: return "constant";
    case ModelKind::Linear: return "linear";
    case ModelKind::LogLinear: return "log_linear";
    case ModelKind::Emax: return "emax";
    case ModelKind::Exponential: return "exponential";
    case ModelKind::Quadratic: return "quadratic";
  }
  return "?";
}

ModelKind kind_from_name(const std::string& name) {
  for (ModelKind k : {ModelKind::Constant, ModelKind::Linear, ModelKind::LogLinear,
                      ModelKind::Emax, ModelKind::Exponential, ModelKind::Quadratic}) {
    if (name == kind_name(k)) return k;
  }
  throw std::invalid_argument("unknown model kind: " + name);
}

int vartheta_size(ModelKind k) {
  switch (k) {
    case ModelKind::Constant: return 1;
    case ModelKind::Linear: return 2;
    default: return 3;
  }
}

int theta_size(ModelKind k) { return 1 + vartheta_size(k); }

CandidateModel::CandidateModel(ModelKind k, Vector vt, double s2)
    : kind(k), vartheta(std::move(vt)), sigma2(s2) {
  require(sigma2 > 0.0 && std::isfinite(sigma2), "sigma2 must be positive");
  require(vartheta.size() == vartheta_size(kind),
          std::string("wrong vartheta length for kind ") + kind_name(kind));
  require(vartheta.allFinite(), "vartheta must be finite");
}

Vector CandidateModel::theta() const {
  Vector t(1 + vartheta.size());
  t(0) = sigma2;
  t.tail(vartheta.size()) = vartheta;
  return t;
}

std::string CandidateModel::label() const {
  std::ostringstream os;
  os << kind_name(kind) << "(";
  for (int i = 0; i < vartheta.size(); ++i) os << (i ? "," : "") << vartheta(i);
  os << ";s2=" << sigma2 << ")";
  return os.str();
}

bool is_admissible(ModelKind kind, const Vector& vartheta, const DesignSpace& space) {
  if (!vartheta.allFinite()) return false;
  switch (kind) {
    case ModelKind::LogLinear:
    case ModelKind::Emax:
      return vartheta(2) > -space.lower + 1e-12;
    case ModelKind::Exponential:
      return std::abs(vartheta(2)) > 1e-8;
    default:
      return true;
  }
}

void check_admissible(const CandidateModel& m, const DesignSpace& space) {
  if (!is_admissible(m.kind, m.vartheta, space)) {
    throw std::domain_error("model " + m.label() + " is undefined on the design space");
  }
}

ApproximateDesign::ApproximateDesign(std::vector<double> points, std::vector<double> weights,
                                     const DesignSpace& space)
    : points_(std::move(points)), weights_(std::move(weights)), space_(space) {
  require(!points_.empty(), "design needs at least one support point");
  require(points_.size() == weights_.size(), "points/weights length mismatch");
  require(all_finite(points_) && all_finite(weights_), "design entries must be finite");
  for (double x : points_) require(space_.contains(x), "support point outside design space");
  for (double w : weights_) require(w > 0.0, "design weights must be positive");

  std::vector<int> order(points_.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return points_[a] < points_[b]; });
  std::vector<double> p(points_.size()), w(points_.size());
  for (size_t i = 0; i < order.size(); ++i) {
    p[i] = points_[order[i]];
    w[i] = weights_[order[i]];
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  require(total > 0.0 && std::isfinite(total), "total design weight must be positive");
  for (double& wi : w) wi /= total;
  points_ = std::move(p);
  weights_ = std::move(w);
}

TargetED::TargetED(double a, DesignSpace s) : alpha(a), space(s) {
  require(a > 0.0 && a < 1.0, "alpha must lie in (0,1)");
}

AveragingWeights::AveragingWeights(Vector weights) : w(std::move(weights)) {
  require(w.size() > 0, "need at least one weight");
  for (int i = 0; i < w.size(); ++i) require(w(i) >= 0.0, "averaging weights must be >= 0");
  const double total = w.sum();
  require(std::abs(total - 1.0) <= 1e-6, "averaging weights must sum to 1");
  w /= total;
}

AveragingWeights AveragingWeights::uniform(int r) {
  return AveragingWeights(Vector::Constant(r, 1.0 / r));
}

TruthPrior::TruthPrior(std::vector<Atom> a) : atoms(std::move(a)) {
  require(!atoms.empty(), "prior needs at least one atom");
  double total = 0.0;
  for (const Atom& atom : atoms) {
    require(atom.prob > 0.0 && std::isfinite(atom.prob), "prior probabilities must be positive");
    total += atom.prob;
  }
  require(std::abs(total - 1.0) <= 1e-6, "prior probabilities must sum to 1");
  for (Atom& atom : atoms) atom.prob /= total;
}

TruthPrior TruthPrior::point_mass(const CandidateModel& g) {
  return TruthPrior({Atom{g, 1.0}});
}

ApproximateDesign canonicalize(const ApproximateDesign& design, double merge_tol,
                               double weight_tol) {
  require(merge_tol >= 0.0 && weight_tol >= 0.0, "tolerances must be nonnegative");
  std::vector<double> pts = design.points();
  std::vector<double> wts = design.weights();

  // Merge passes until no pair of adjacent points is closer than merge_tol,
  // so the operation is a fixpoint of itself.
  bool merged = true;
  while (merged && pts.size() > 1) {
    merged = false;
    std::vector<double> np, nw;
    size_t i = 0;
    while (i < pts.size()) {
      double wsum = wts[i];
      double xsum = pts[i] * wts[i];
      size_t j = i + 1;
      while (j < pts.size() && pts[j] - pts[j - 1] <= merge_tol) {
        wsum += wts[j];
        xsum += pts[j] * wts[j];
        merged = true;
        ++j;
      }
      np.push_back(xsum / wsum);
      nw.push_back(wsum);
      i = j;
    }
    pts = std::move(np);
    wts = std::move(nw);
  }

  std::vector<double> fp, fw;
  for (size_t i = 0; i < pts.size(); ++i) {
    if (wts[i] >= weight_tol) {
      fp.push_back(std::clamp(pts[i], design.space().lower, design.space().upper));
      fw.push_back(wts[i]);
    }
  }
  if (fp.empty()) throw std::runtime_error("degenerate design: all mass dropped");
  return ApproximateDesign(std::move(fp), std::move(fw), design.space());
}

ExactDesign round_design(const ApproximateDesign& design, int n) {
  const int k = design.size();
  if (n < k) throw std::invalid_argument("sample size smaller than number of support points");
  const std::vector<double>& w = design.weights();

  std::vector<int> counts(k);
  long total = 0;
  for (int i = 0; i < k; ++i) {
    counts[i] = static_cast<int>(std::ceil((n - 0.5 * k) * w[i]));
    if (counts[i] < 1) counts[i] = 1;
    total += counts[i];
  }
  while (total < n) {
    int best = 0;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
      const double ratio = counts[i] / w[i];
      if (ratio < best_ratio - 1e-15) {
        best_ratio = ratio;
        best = i;
      }
    }
    ++counts[best];
    ++total;
  }
  while (total > n) {
    int best = -1;
    double best_ratio = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < k; ++i) {
      if (counts[i] <= 1) continue;
      const double ratio = (counts[i] - 1.0) / w[i];
      if (ratio > best_ratio + 1e-15) {
        best_ratio = ratio;
        best = i;
      }
    }
    if (best < 0) throw std::runtime_error("cannot reduce counts below one per point");
    --counts[best];
    --total;
  }
  return ExactDesign{design.points(), counts, n};
}

}  // namespace mavdes
