#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mavdes/config.hpp"
#include "mavdes/csv.hpp"
#include "mavdes/optimizer.hpp"

namespace fs = std::filesystem;
using namespace mavdes;

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<int> threads;
  std::optional<std::string> strategy;
  double verify_tol = 1e-5;  // relative to |Phi^pi|
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "configuration file (JSON)")->required();
  cmd->add_option("--seed", args.seed, "override the configured seed");
  cmd->add_option("--out", args.out_dir, "output directory for CSV/JSON artifacts");
  cmd->add_option("--threads", args.threads, "worker threads (0 = hardware)");
  cmd->add_option("--strategy", args.strategy, "search strategy: cobyla|neldermead")
      ->check(CLI::IsMember({"cobyla", "neldermead"}));
  cmd->add_option("--verify-tol", args.verify_tol,
                  "relative tolerance on the sensitivity violation");
}

RunConfig load(const CommonArgs& args) {
  RunConfig cfg = load_config(args.config_path);
  if (args.seed) {
    cfg.optimizer.seed = *args.seed;
    if (cfg.simulation) cfg.simulation->seed = *args.seed;
  }
  if (args.threads) cfg.optimizer.threads = *args.threads;
  if (args.strategy) {
    cfg.optimizer.strategy =
        *args.strategy == "cobyla" ? SearchStrategy::Cobyla : SearchStrategy::NelderMead;
  }
  return cfg;
}

int cmd_ed(const CommonArgs& args) {
  const RunConfig cfg = load(args);
  std::printf("kind,ed_alpha\n");
  for (const CandidateModel& c : cfg.candidates) {
    const double mu = ed_alpha(c.kind, c.vartheta, cfg.target());
    std::printf("%s,%.10g\n", kind_name(c.kind), mu);
  }
  return 0;
}

int cmd_project(const CommonArgs& args) {
  const RunConfig cfg = load(args);
  if (!cfg.design) throw std::runtime_error("config needs a 'design' entry for project");
  if (!cfg.prior || cfg.prior->size() != 1)
    throw std::runtime_error("project expects a one-point prior naming the truth");
  const CandidateModel& g = cfg.prior->atoms[0].model;

  std::ostringstream csv;
  csv << csv_metadata(cfg.optimizer.seed, "theta entries in model units");
  csv << "candidate,sigma2_star,vartheta_star,kl,ed_alpha\n";
  std::printf("%-12s %-14s %-36s %-12s %s\n", "candidate", "sigma2*", "vartheta*", "KL", "ED");
  for (const CandidateModel& c : cfg.candidates) {
    const Projection p = project(g, c.kind, c.vartheta, *cfg.design);
    if (!p.converged)
      throw std::runtime_error(std::string("projection did not converge for ") + c.label());
    const double mu = ed_alpha(c.kind, p.vartheta(), cfg.target());
    std::ostringstream vt;
    vt.precision(10);
    for (int i = 0; i < p.vartheta().size(); ++i) vt << (i ? " " : "") << p.vartheta()(i);
    std::printf("%-12s %-14.8g %-36s %-12.8g %.8g\n", kind_name(c.kind), p.sigma2(),
                vt.str().c_str(), p.kl_value, mu);
    csv << kind_name(c.kind) << "," << p.sigma2() << "," << vt.str() << "," << p.kl_value << ","
        << mu << "\n";
  }
  if (!args.out_dir.empty())
    atomic_write_text(fs::path(args.out_dir) / "projection.csv", csv.str());
  return 0;
}

int run_verify(const RunConfig& cfg, const ApproximateDesign& design, const CommonArgs& args) {
  const CriterionContext ctx = cfg.criterion_context();
  const SensitivityReport rep = verify_optimality(ctx, design, 0.25);
  const double tol = args.verify_tol * std::abs(rep.criterion_value);
  double max_support = 0.0;
  for (double v : rep.support_equalities) max_support = std::max(max_support, v);
  std::printf("criterion value    %.10g\n", rep.criterion_value);
  std::printf("max violation      %.3e (tol %.3e)\n", rep.max_violation, tol);
  std::printf("support |d_pi| max %.3e\n", max_support);
  if (!args.out_dir.empty())
    atomic_write_text(fs::path(args.out_dir) / "sensitivity.csv",
                      sensitivity_csv(rep, cfg.optimizer.seed));
  return (rep.max_violation > tol || max_support > tol) ? 2 : 0;
}

int cmd_verify(const CommonArgs& args) {
  const RunConfig cfg = load(args);
  if (!cfg.design) throw std::runtime_error("config needs a 'design' entry for verify");
  return run_verify(cfg, *cfg.design, args);
}

int cmd_optimize(const CommonArgs& args) {
  const RunConfig cfg = load(args);
  const CriterionContext ctx = cfg.criterion_context();
  const OptimResult res = optimize(ctx, cfg.optimizer);

  std::printf("criterion value  %.12g\n", res.value);
  std::printf("evaluations      %ld\n", res.evals);
  std::printf("design (%d points):\n", res.design.size());
  for (int i = 0; i < res.design.size(); ++i)
    std::printf("  x=%.6f  w=%.6f\n", res.design.points()[i], res.design.weights()[i]);

  if (!args.out_dir.empty()) {
    nlohmann::json j;
    j["points"] = res.design.points();
    j["weights"] = res.design.weights();
    j["value"] = res.value;
    j["evals"] = res.evals;
    j["seed"] = cfg.optimizer.seed;
    atomic_write_text(fs::path(args.out_dir) / "design.json", j.dump(2) + "\n");
    atomic_write_text(fs::path(args.out_dir) / "sensitivity.csv",
                      sensitivity_csv(res.verified, cfg.optimizer.seed));
  }
  const double tol = args.verify_tol * std::abs(res.value);
  double max_support = 0.0;
  for (double v : res.verified.support_equalities) max_support = std::max(max_support, v);
  std::printf("max violation    %.3e (tol %.3e)\n", res.verified.max_violation, tol);
  return (res.verified.max_violation > tol || max_support > tol) ? 2 : 0;
}

int cmd_simulate(const CommonArgs& args) {
  const RunConfig cfg = load(args);
  if (!cfg.simulation) throw std::runtime_error("config needs a 'simulation' entry");
  MseStudyConfig mc{cfg.simulation->truths, cfg.candidates,       cfg.simulation->designs,
                    cfg.simulation->n_list, cfg.simulation->reps, cfg.simulation->seed,
                    cfg.target(),           cfg.optimizer.threads};
  const MseReport report = mse_study(mc);
  const std::string csv = mse_csv(report);
  std::fputs(csv.c_str(), stdout);
  if (!args.out_dir.empty()) atomic_write_text(fs::path(args.out_dir) / "mse.csv", csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal designs for averaging estimates across dose-response models"};
  app.require_subcommand(1);

  CommonArgs args;
  CLI::App* ed = app.add_subcommand("ed", "effective doses of the configured candidates");
  CLI::App* project = app.add_subcommand("project", "best-approximation parameters under a design");
  CLI::App* optimize = app.add_subcommand("optimize", "search for the criterion-minimizing design");
  CLI::App* verify = app.add_subcommand("verify", "sensitivity scan of a design");
  CLI::App* simulate = app.add_subcommand("simulate", "Monte-Carlo mean-squared-error study");
  for (CLI::App* c : {ed, project, optimize, verify, simulate}) add_common(c, args);

  CLI11_PARSE(app, argc, argv);
  try {
    if (ed->parsed()) return cmd_ed(args);
    if (project->parsed()) return cmd_project(args);
    if (optimize->parsed()) return cmd_optimize(args);
    if (verify->parsed()) return cmd_verify(args);
    if (simulate->parsed()) return cmd_simulate(args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
