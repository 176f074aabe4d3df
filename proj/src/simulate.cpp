#include "mavdes/simulate.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "mavdes/nls.hpp"
#include "mavdes/rng.hpp"

namespace mavdes {

Dataset draw_data(const CandidateModel& g, const ExactDesign& exact, std::uint64_t seed) {
  GaussianStream rng(seed);
  const double sd = std::sqrt(g.sigma2);

  Dataset d;
  d.x = exact.points;
  d.counts = exact.counts;
  d.n = exact.n;
  d.y.resize(exact.points.size());
  d.mean_y.resize(exact.points.size());
  for (size_t i = 0; i < exact.points.size(); ++i) {
    const double eta = mean_value(g.kind, g.vartheta, exact.points[i]);
    double sum = 0.0;
    d.y[i].reserve(exact.counts[i]);
    for (int j = 0; j < exact.counts[i]; ++j) {
      const double y = eta + sd * rng.normal();
      d.y[i].push_back(y);
      sum += y;
    }
    d.mean_y[i] = sum / exact.counts[i];
    for (double y : d.y[i]) d.sse_within += (y - d.mean_y[i]) * (y - d.mean_y[i]);
  }
  return d;
}

FitResult fit_mle(ModelKind kind, const Dataset& data, const std::vector<Vector>& starts,
                  const DesignSpace& space) {
  if (data.n <= 0 || data.x.empty()) throw std::invalid_argument("empty dataset");
  const int q = vartheta_size(kind);
  const int k = static_cast<int>(data.x.size());

  // The group means carry all the information about vartheta; the
  // within-group scatter only shifts the SSE.
  NlsProblem prob;
  prob.dim = q;
  prob.residuals = k;
  prob.eval = [&](const Vector& vt, Vector& r, Matrix* jac) {
    if (!is_admissible(kind, vt, space)) return false;
    for (int i = 0; i < k; ++i) {
      const MeanEval me = mean_eval(kind, vt, data.x[i]);
      const double sw = std::sqrt(static_cast<double>(data.counts[i]));
      r(i) = sw * (data.mean_y[i] - me.value);
      if (jac) jac->row(i) = -sw * me.grad.transpose();
    }
    return true;
  };

  NlsResult best;
  best.sse = std::numeric_limits<double>::infinity();
  for (const Vector& s : starts) {
    if (s.size() != q || !is_admissible(kind, s, space)) continue;
    const NlsResult r = levenberg_marquardt(prob, s);
    if (r.sse < best.sse) best = r;
  }

  FitResult out;
  if (!std::isfinite(best.sse)) {
    out.theta_hat = Vector::Zero(q + 1);
    out.converged = false;
    out.loglik_sum = -std::numeric_limits<double>::infinity();
    out.aic = -std::numeric_limits<double>::infinity();
    return out;
  }

  const double sse = best.sse + data.sse_within;
  const double s2_hat = sse / data.n;
  out.theta_hat = Vector(q + 1);
  out.theta_hat(0) = s2_hat;
  out.theta_hat.tail(q) = best.x;
  out.converged = best.converged;
  if (s2_hat > 0.0) {
    out.loglik_sum = -0.5 * data.n * (std::log(2.0 * M_PI * s2_hat) + 1.0);
  } else {
    out.loglik_sum = std::numeric_limits<double>::infinity();
  }
  out.aic = 2.0 * out.loglik_sum - 2.0 * (q + 1);
  return out;
}

AveragingWeights smooth_aic_weights(const std::vector<FitResult>& fits) {
  const int r = static_cast<int>(fits.size());
  if (r == 0) throw std::invalid_argument("no fits");
  double max_aic = -std::numeric_limits<double>::infinity();
  for (const FitResult& f : fits) max_aic = std::max(max_aic, f.aic);
  Vector w(r);
  for (int s = 0; s < r; ++s) w(s) = std::exp(0.5 * fits[s].aic - 0.5 * max_aic);
  return AveragingWeights(Vector(w / w.sum()));
}

const char* scheme_name(EstimatorScheme s) {
  switch (s) {
    case EstimatorScheme::Uniform: return "uniform";
    case EstimatorScheme::SmoothAic: return "smooth_aic";
    case EstimatorScheme::SelectAic: return "select_aic";
  }
  return "?";
}

EstimateOutcome estimate(const std::vector<FitResult>& fits, const std::vector<ModelKind>& kinds,
                         EstimatorScheme scheme, const TargetED& target) {
  EstimateOutcome out;
  const int r = static_cast<int>(fits.size());
  if (r == 0 || kinds.size() != fits.size()) {
    out.why = "no fits";
    return out;
  }
  for (int s = 0; s < r; ++s) {
    if (!fits[s].converged) {
      out.why = std::string("fit did not converge: ") + kind_name(kinds[s]);
      return out;
    }
  }

  std::vector<double> mu(r);
  auto mu_of = [&](int s) -> bool {
    try {
      mu[s] = ed_alpha(kinds[s], fits[s].vartheta(), target);
    } catch (const std::exception& e) {
      out.why = std::string(kind_name(kinds[s])) + ": " + e.what();
      return false;
    }
    return true;
  };

  switch (scheme) {
    case EstimatorScheme::Uniform: {
      double acc = 0.0;
      for (int s = 0; s < r; ++s) {
        if (!mu_of(s)) return out;
        acc += mu[s];
      }
      out.value = acc / r;
      break;
    }
    case EstimatorScheme::SmoothAic: {
      const AveragingWeights w = smooth_aic_weights(fits);
      double acc = 0.0;
      for (int s = 0; s < r; ++s) {
        if (!mu_of(s)) return out;
        acc += w.w(s) * mu[s];
      }
      out.value = acc;
      break;
    }
    case EstimatorScheme::SelectAic: {
      int pick = 0;
      for (int s = 1; s < r; ++s) {
        if (fits[s].aic > fits[pick].aic ||
            (fits[s].aic == fits[pick].aic &&
             theta_size(kinds[s]) < theta_size(kinds[pick]))) {
          pick = s;
        }
      }
      if (!mu_of(pick)) return out;
      out.value = mu[pick];
      break;
    }
  }
  out.ok = true;
  return out;
}

const MseCell& MseReport::at(const std::string& truth, const std::string& design, int n,
                             EstimatorScheme scheme) const {
  for (const MseCell& c : cells) {
    if (c.truth == truth && c.design == design && c.n == n && c.scheme == scheme) return c;
  }
  throw std::out_of_range("no such study cell");
}

MseReport mse_study(const MseStudyConfig& config) {
  if (config.reps < 1) throw std::invalid_argument("need at least one replication");

  // Deterministic multistart battery per candidate: configured start plus
  // sign-pattern perturbations.
  std::vector<ModelKind> kinds;
  std::vector<std::vector<Vector>> starts;
  for (const CandidateModel& c : config.candidates) {
    kinds.push_back(c.kind);
    std::vector<Vector> battery;
    static const double pat[8][3] = {{0, 0, 0},    {1, -1, 1},  {-1, 1, -1}, {1, 1, -1},
                                     {-1, -1, 1},  {1, -1, -1}, {-1, 1, 1},  {1, 1, 1}};
    for (const auto& p : pat) {
      Vector v = c.vartheta;
      for (int j = 0; j < v.size() && j < 3; ++j) v(j) *= 1.0 + 0.25 * p[j];
      battery.push_back(v);
    }
    starts.push_back(std::move(battery));
  }

  MseReport report;
  report.seed = config.seed;
  report.scale = 1.0;

  for (size_t ti = 0; ti < config.truths.size(); ++ti) {
    const NamedModel& truth = config.truths[ti];
    const double mu_true = ed_alpha(truth.model.kind, truth.model.vartheta, config.target);
    for (size_t di = 0; di < config.designs.size(); ++di) {
      const NamedDesign& des = config.designs[di];
      for (int n : config.n_list) {
        const ExactDesign exact = round_design(des.design, n);

        constexpr int kSchemes = 3;
        std::vector<std::array<double, kSchemes>> errs(config.reps,
                                                       {std::nan(""), std::nan(""), std::nan("")});
        std::atomic<int> cursor{0};
        auto worker = [&]() {
          for (;;) {
            const int rep = cursor.fetch_add(1);
            if (rep >= config.reps) break;
            std::uint64_t s = config.seed;
            s = hash_combine(s, ti);
            s = hash_combine(s, di);
            s = hash_combine(s, static_cast<std::uint64_t>(n));
            s = hash_combine(s, static_cast<std::uint64_t>(rep));
            const Dataset data = draw_data(truth.model, exact, s);
            std::vector<FitResult> fits;
            fits.reserve(kinds.size());
            for (size_t c = 0; c < kinds.size(); ++c)
              fits.push_back(fit_mle(kinds[c], data, starts[c], config.target.space));
            for (int sc = 0; sc < kSchemes; ++sc) {
              const EstimateOutcome est =
                  estimate(fits, kinds, static_cast<EstimatorScheme>(sc), config.target);
              if (est.ok) errs[rep][sc] = est.value - mu_true;
            }
          }
        };
        int threads = config.threads > 0 ? config.threads
                                         : static_cast<int>(std::thread::hardware_concurrency());
        threads = std::max(1, std::min(threads, config.reps));
        if (threads == 1) {
          worker();
        } else {
          std::vector<std::thread> pool;
          for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
          for (std::thread& t : pool) t.join();
        }

        for (int sc = 0; sc < kSchemes; ++sc) {
          MseCell cell;
          cell.truth = truth.id;
          cell.design = des.id;
          cell.n = n;
          cell.scheme = static_cast<EstimatorScheme>(sc);
          // Two-pass moments in replication order.
          std::vector<double> kept;
          kept.reserve(config.reps);
          for (int rep = 0; rep < config.reps; ++rep) {
            if (std::isnan(errs[rep][sc])) {
              ++cell.excluded;
            } else {
              kept.push_back(errs[rep][sc]);
            }
          }
          cell.reps = static_cast<int>(kept.size());
          if (!kept.empty()) {
            double mean = 0.0, msq = 0.0;
            for (double e : kept) mean += e;
            mean /= kept.size();
            for (double e : kept) msq += e * e;
            msq /= kept.size();
            double var = 0.0;
            for (double e : kept) var += (e - mean) * (e - mean);
            var /= kept.size();
            cell.mse = msq;
            cell.bias2 = mean * mean;
            cell.variance = var;
          }
          report.cells.push_back(std::move(cell));
        }
      }
    }
  }
  return report;
}

}  // namespace mavdes
