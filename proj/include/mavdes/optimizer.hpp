#pragma once

#include <cstdint>

#include "mavdes/criterion.hpp"
#include "mavdes/search.hpp"

namespace mavdes {

enum class SearchStrategy { Cobyla, NelderMead };

struct OptimizerConfig {
  int k_min = 3;
  int k_max = 6;
  int restarts = 8;
  long max_evals = 6000;  // per start
  double merge_tol = 1e-6;
  double weight_tol = 1e-5;
  std::uint64_t seed = 1;
  SearchStrategy strategy = SearchStrategy::Cobyla;
  int threads = 0;  // 0: hardware concurrency
  double rho_begin = 0.1;
  double rho_end = 1e-7;
  bool polish = true;
  double verify_grid_step = 0.25;
};

struct OptimResult {
  ApproximateDesign design;
  double value = 0.0;
  long evals = 0;
  std::vector<double> per_start_values;
  SensitivityReport verified;
  bool converged = false;
  int k_used = 0;
};

// Minimizes the Bayesian averaging-MSE criterion over k-point designs
// (k in [k_min, k_max]), multistart, parallel over restarts, deterministic
// for a fixed seed and configuration.
OptimResult optimize(const CriterionContext& ctx, const OptimizerConfig& config);

// One-point-prior special case: the locally optimal design for a single
// assumed truth with itself as the only candidate.
OptimResult optimize_local(const CandidateModel& g, const TargetED& target, int n,
                           const OptimizerConfig& config);

}  // namespace mavdes
