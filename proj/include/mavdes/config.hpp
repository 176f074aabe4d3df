#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "mavdes/core.hpp"
#include "mavdes/optimizer.hpp"
#include "mavdes/simulate.hpp"

namespace mavdes {

// Run configuration loaded from a versioned JSON file; see README for the
// schema. Everything is validated on load through the library constructors.
struct RunConfig {
  int version = 1;
  DesignSpace space{0.0, 1.0};
  double alpha = 0.5;
  int n = 1;
  std::vector<CandidateModel> candidates;
  std::optional<Vector> weight_values;  // empty: uniform
  std::optional<TruthPrior> prior;
  std::optional<ApproximateDesign> design;  // input design for project/verify
  OptimizerConfig optimizer;
  std::optional<int> k_fixed;  // single k instead of the k range

  struct Simulation {
    std::vector<NamedModel> truths;
    std::vector<NamedDesign> designs;
    std::vector<int> n_list;
    int reps = 1000;
    std::uint64_t seed = 1;
  };
  std::optional<Simulation> simulation;

  TargetED target() const { return TargetED(alpha, space); }
  AveragingWeights weights() const;
  CriterionContext criterion_context() const;
};

RunConfig load_config(const std::filesystem::path& file);
std::string serialize_config(const RunConfig& config);
void save_config(const RunConfig& config, const std::filesystem::path& file);

}  // namespace mavdes
