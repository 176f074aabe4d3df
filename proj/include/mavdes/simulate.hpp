#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "mavdes/core.hpp"
#include "mavdes/models.hpp"

namespace mavdes {

// Responses grouped by design point, plus the sufficient statistics the
// Gaussian fits need.
struct Dataset {
  std::vector<double> x;
  std::vector<int> counts;
  std::vector<std::vector<double>> y;
  std::vector<double> mean_y;
  double sse_within = 0.0;
  int n = 0;
};

Dataset draw_data(const CandidateModel& g, const ExactDesign& exact, std::uint64_t seed);

// Gaussian maximum likelihood for one candidate family on a dataset.
// sigma2_hat = SSE/n exactly; loglik_sum is the unnormalized sum of log
// densities at the optimum; aic = 2 loglik_sum - 2 p.
struct FitResult {
  Vector theta_hat;
  double loglik_sum = 0.0;
  double aic = 0.0;
  bool converged = false;

  Vector vartheta() const { return theta_hat.tail(theta_hat.size() - 1); }
  double sigma2() const { return theta_hat(0); }
};

FitResult fit_mle(ModelKind kind, const Dataset& data, const std::vector<Vector>& starts,
                  const DesignSpace& space);

AveragingWeights smooth_aic_weights(const std::vector<FitResult>& fits);

enum class EstimatorScheme { Uniform, SmoothAic, SelectAic };
const char* scheme_name(EstimatorScheme s);

// Target estimate under one weighting scheme. Replications with
// non-converged fits or unattainable targets are flagged, not imputed.
struct EstimateOutcome {
  double value = 0.0;
  bool ok = false;
  std::string why;
};

EstimateOutcome estimate(const std::vector<FitResult>& fits, const std::vector<ModelKind>& kinds,
                         EstimatorScheme scheme, const TargetED& target);

// Named inputs for the Monte-Carlo study.
struct NamedModel {
  std::string id;
  CandidateModel model;
};
struct NamedDesign {
  std::string id;
  ApproximateDesign design;
};

struct MseStudyConfig {
  std::vector<NamedModel> truths;
  std::vector<CandidateModel> candidates;
  std::vector<NamedDesign> designs;
  std::vector<int> n_list;
  int reps = 1000;
  std::uint64_t seed = 1;
  TargetED target;
  int threads = 0;
};

struct MseCell {
  std::string truth;
  std::string design;
  int n = 0;
  EstimatorScheme scheme = EstimatorScheme::Uniform;
  double mse = 0.0;
  double bias2 = 0.0;
  double variance = 0.0;
  int reps = 0;
  int excluded = 0;
};

// Monte-Carlo mean-squared-error table. Values are raw squared dose units;
// scale records the reporting factor written into CSV metadata.
struct MseReport {
  std::vector<MseCell> cells;
  std::uint64_t seed = 0;
  double scale = 1.0;

  const MseCell& at(const std::string& truth, const std::string& design, int n,
                    EstimatorScheme scheme) const;
};

MseReport mse_study(const MseStudyConfig& config);

}  // namespace mavdes
