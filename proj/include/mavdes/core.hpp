#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mavdes {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Dose interval [lower, upper] on which designs live.
struct DesignSpace {
  double lower;
  double upper;

  DesignSpace(double lo, double hi);
  double width() const { return upper - lower; }
  bool contains(double x) const { return x >= lower && x <= upper; }
};

enum class ModelKind { Constant, Linear, LogLinear, Emax, Exponential, Quadratic };

const char* kind_name(ModelKind k);
ModelKind kind_from_name(const std::string& name);

// Length of the mean parameter vartheta for a kind.
int vartheta_size(ModelKind k);
// Full parameter dimension p = 1 + vartheta_size; theta = (sigma2, vartheta).
int theta_size(ModelKind k);

// One Gaussian regression model: responses have mean eta_kind(x, vartheta)
// and variance sigma2. The joint parameter is theta = (sigma2, vartheta),
// sigma2 always first.
struct CandidateModel {
  ModelKind kind;
  Vector vartheta;
  double sigma2;

  CandidateModel(ModelKind k, Vector vt, double s2);
  Vector theta() const;
  std::string label() const;
};

// True when the mean function is defined and smooth on the whole space
// (log-linear and Emax need vartheta3 > -lower, exponential needs a
// nonzero rate denominator).
bool is_admissible(ModelKind kind, const Vector& vartheta, const DesignSpace& space);
void check_admissible(const CandidateModel& m, const DesignSpace& space);

// Probability measure with finite support on the design space.
class ApproximateDesign {
 public:
  // Weights are taken as raw positive reals and renormalized; points are
  // sorted together with their weights.
  ApproximateDesign(std::vector<double> points, std::vector<double> weights,
                    const DesignSpace& space);

  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  const DesignSpace& space() const { return space_; }
  int size() const { return static_cast<int>(points_.size()); }

 private:
  std::vector<double> points_;
  std::vector<double> weights_;
  DesignSpace space_;
};

// Integer allocation of n runs to support points.
struct ExactDesign {
  std::vector<double> points;
  std::vector<int> counts;
  int n = 0;
};

// Effective-dose target: smallest x in the space reaching a fraction alpha of
// the placebo-adjusted effect over the space.
struct TargetED {
  double alpha;
  DesignSpace space;

  TargetED(double a, DesignSpace s);
};

// Fixed model-averaging weights, one per candidate.
struct AveragingWeights {
  Vector w;

  explicit AveragingWeights(Vector weights);
  static AveragingWeights uniform(int r);
  int size() const { return static_cast<int>(w.size()); }
};

// Finite discrete prior over (model, parameter) truths.
struct TruthPrior {
  struct Atom {
    CandidateModel model;
    double prob;
  };
  std::vector<Atom> atoms;

  explicit TruthPrior(std::vector<Atom> a);
  static TruthPrior point_mass(const CandidateModel& g);
  int size() const { return static_cast<int>(atoms.size()); }
};

// Merges points closer than merge_tol (weight-averaged location), drops
// weights below weight_tol, renormalizes. Throws if all mass is dropped.
ApproximateDesign canonicalize(const ApproximateDesign& design, double merge_tol,
                               double weight_tol);

// Efficient rounding of the weights to integer counts summing to n
// (apportionment maximizing the worst count/weight ratio). Requires n >= k.
ExactDesign round_design(const ApproximateDesign& design, int n);

}  // namespace mavdes
