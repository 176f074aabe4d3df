#include "mavdes/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "mavdes/rng.hpp"

namespace mavdes {

namespace {

// Design vector layout: k scaled points in [0,1] followed by k-1 weights; the
// k-th weight is the remaining mass.
struct DesignCoder {
  DesignSpace space;
  int k;

  int dim() const { return 2 * k - 1; }

  Vector project(Vector z) const {
    for (int i = 0; i < k; ++i) z(i) = std::clamp(z(i), 0.0, 1.0);
    project_weight_block(z.data() + k, k - 1);
    return z;
  }

  ApproximateDesign decode(const Vector& z, double weight_floor) const {
    std::vector<double> pts, wts;
    double tail = 1.0;
    for (int i = 0; i < k - 1; ++i) tail -= z(k + i);
    for (int i = 0; i < k; ++i) {
      const double w = (i < k - 1) ? z(k + i) : tail;
      if (w > weight_floor) {
        pts.push_back(space.lower + space.width() * std::clamp(z(i), 0.0, 1.0));
        wts.push_back(w);
      }
    }
    if (pts.empty()) throw std::runtime_error("degenerate design: all mass dropped");
    return ApproximateDesign(std::move(pts), std::move(wts), space);
  }

};

Vector initial_design(const DesignCoder& coder, int restart, std::uint64_t seed) {
  const int k = coder.k;
  Vector z(coder.dim());
  if (restart == 0) {
    for (int i = 0; i < k; ++i) z(i) = (k == 1) ? 0.5 : double(i) / (k - 1);
    for (int i = 0; i < k - 1; ++i) z(k + i) = 1.0 / k;
    return z;
  }
  // Stratified jitter, deterministic per (seed, k, restart).
  GaussianStream rng(hash_combine(hash_combine(seed, k), restart));
  for (int i = 0; i < k; ++i) z(i) = (i + rng.uniform()) / k;
  std::sort(z.data(), z.data() + k);
  double total = 0.0;
  Vector w(k);
  for (int i = 0; i < k; ++i) {
    w(i) = 0.2 + rng.uniform();
    total += w(i);
  }
  for (int i = 0; i < k - 1; ++i) z(k + i) = w(i) / total;
  return coder.project(z);
}

struct StartOutcome {
  Vector z;
  double value = std::numeric_limits<double>::infinity();
  long evals = 0;
};

}  // namespace

OptimResult optimize(const CriterionContext& ctx, const OptimizerConfig& config) {
  if (config.k_min < 2 || config.k_max < config.k_min)
    throw std::invalid_argument("invalid k range");
  if (config.restarts < 1) throw std::invalid_argument("need at least one restart");

  struct Job {
    int k;
    int restart;
  };
  std::vector<Job> jobs;
  for (int k = config.k_min; k <= config.k_max; ++k)
    for (int r = 0; r < config.restarts; ++r) jobs.push_back({k, r});

  std::vector<StartOutcome> outcomes(jobs.size());
  std::atomic<size_t> cursor{0};

  auto run_jobs = [&]() {
    CriterionEvaluator ev(ctx);
    for (;;) {
      const size_t j = cursor.fetch_add(1);
      if (j >= jobs.size()) break;
      const DesignCoder coder{ctx.target.space, jobs[j].k};
      Objective obj = [&](const Vector& z) {
        return ev.bayes(coder.decode(z, 1e-10));
      };
      Projector proj = [&](const Vector& z) { return coder.project(z); };
      SearchOptions sopts;
      sopts.rho_begin = config.rho_begin;
      sopts.rho_end = config.rho_end;
      sopts.max_evals = config.max_evals;
      const Vector z0 = initial_design(coder, jobs[j].restart, config.seed);
      const SearchResult res = (config.strategy == SearchStrategy::Cobyla)
                                   ? cobyla_lite(obj, z0, proj, sopts)
                                   : nelder_mead(obj, z0, proj, sopts);
      outcomes[j] = {res.x, res.f, res.evals};
    }
  };

  int threads = config.threads > 0 ? config.threads
                                   : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  if (threads == 1) {
    run_jobs();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(run_jobs);
    for (std::thread& t : pool) t.join();
  }

  // Deterministic reduction: best value, ties to fewer points then job order.
  size_t best = jobs.size();
  for (size_t j = 0; j < jobs.size(); ++j) {
    if (!std::isfinite(outcomes[j].value)) continue;
    if (best == jobs.size() || outcomes[j].value < outcomes[best].value -
            1e-12 * (1.0 + std::abs(outcomes[best].value)))
      best = j;
  }
  if (best == jobs.size())
    throw std::runtime_error("design optimization failed: no start produced a finite criterion");

  long evals = 0;
  std::vector<double> per_start;
  per_start.reserve(jobs.size());
  for (const StartOutcome& o : outcomes) {
    per_start.push_back(o.value);
    evals += o.evals;
  }

  CriterionEvaluator ev(ctx);
  DesignCoder coder{ctx.target.space, jobs[best].k};
  Vector z_best = outcomes[best].z;
  double f_best = outcomes[best].value;

  if (config.polish) {
    // Tight local polish of the winning start; Nelder-Mead finishes the last
    // digits well regardless of the main strategy.
    Objective obj = [&](const Vector& z) { return ev.bayes(coder.decode(z, 1e-10)); };
    Projector proj = [&](const Vector& z) { return coder.project(z); };
    SearchOptions sopts;
    sopts.rho_begin = 2e-3;
    sopts.rho_end = 1e-9;
    sopts.max_evals = config.max_evals;
    const SearchResult polish1 = cobyla_lite(obj, z_best, proj, sopts);
    evals += polish1.evals;
    if (polish1.f < f_best) {
      z_best = polish1.x;
      f_best = polish1.f;
    }
    sopts.rho_begin = 1e-4;
    const SearchResult polish2 = nelder_mead(obj, z_best, proj, sopts);
    evals += polish2.evals;
    if (polish2.f < f_best) {
      z_best = polish2.x;
      f_best = polish2.f;
    }
  }

  OptimResult out{canonicalize(coder.decode(z_best, 1e-10), config.merge_tol, config.weight_tol),
                  0.0,
                  evals,
                  std::move(per_start),
                  {},
                  true,
                  0};
  out.k_used = out.design.size();
  out.value = ev.bayes(out.design);
  out.verified = ev.verify(out.design, config.verify_grid_step);
  return out;
}

OptimResult optimize_local(const CandidateModel& g, const TargetED& target, int n,
                           const OptimizerConfig& config) {
  CriterionContext ctx(TruthPrior::point_mass(g), {g}, AveragingWeights::uniform(1), target, n);
  return optimize(ctx, config);
}

}  // namespace mavdes
