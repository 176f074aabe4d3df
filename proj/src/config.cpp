#include "mavdes/config.hpp"

#include <fstream>

#include "json.hpp"
#include "mavdes/csv.hpp"

namespace mavdes {

using nlohmann::json;

namespace {

Vector to_vector(const json& arr) {
  Vector v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v(i) = arr[i].get<double>();
  return v;
}

json from_vector(const Vector& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

CandidateModel parse_model(const json& j) {
  return CandidateModel(kind_from_name(j.at("kind").get<std::string>()),
                        to_vector(j.at("vartheta")), j.at("sigma2").get<double>());
}

json dump_model(const CandidateModel& m) {
  return json{{"kind", kind_name(m.kind)},
              {"vartheta", from_vector(m.vartheta)},
              {"sigma2", m.sigma2}};
}

ApproximateDesign parse_design(const json& j, const DesignSpace& space) {
  std::vector<double> pts = j.at("points").get<std::vector<double>>();
  std::vector<double> wts = j.at("weights").get<std::vector<double>>();
  return ApproximateDesign(std::move(pts), std::move(wts), space);
}

json dump_design(const ApproximateDesign& d) {
  return json{{"points", d.points()}, {"weights", d.weights()}};
}

TruthPrior parse_prior(const json& j, const DesignSpace& space) {
  std::vector<TruthPrior::Atom> atoms;
  if (j.contains("atoms")) {
    for (const json& a : j.at("atoms"))
      atoms.push_back({parse_model(a), a.at("prob").get<double>()});
  }
  // Grid form: vary the listed vartheta indices over relative steps, with the
  // block probability split uniformly over the combinations.
  if (j.contains("grids")) {
    for (const json& gspec : j.at("grids")) {
      const CandidateModel base = parse_model(gspec);
      const double block_prob = gspec.at("prob").get<double>();
      std::vector<int> vary = gspec.at("vary_indices").get<std::vector<int>>();
      std::vector<double> steps = gspec.value("rel_steps", std::vector<double>{0.9, 1.0, 1.1});
      std::vector<Vector> grid{base.vartheta};
      for (int idx : vary) {
        std::vector<Vector> next;
        for (const Vector& v : grid) {
          for (double s : steps) {
            Vector nv = v;
            nv(idx) = base.vartheta(idx) * s;
            next.push_back(nv);
          }
        }
        grid = std::move(next);
      }
      for (const Vector& v : grid)
        atoms.push_back(
            {CandidateModel(base.kind, v, base.sigma2), block_prob / grid.size()});
    }
  }
  (void)space;
  return TruthPrior(std::move(atoms));
}

}  // namespace

AveragingWeights RunConfig::weights() const {
  if (weight_values) return AveragingWeights(*weight_values);
  return AveragingWeights::uniform(static_cast<int>(candidates.size()));
}

CriterionContext RunConfig::criterion_context() const {
  if (!prior) throw std::invalid_argument("config has no prior");
  if (candidates.empty()) throw std::invalid_argument("config has no candidates");
  return CriterionContext(*prior, candidates, weights(), target(), n);
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config file " + file.string());
  json j = json::parse(in);

  RunConfig cfg;
  cfg.version = j.value("version", 1);
  if (cfg.version != 1) throw std::runtime_error("unsupported config version");
  const json& sp = j.at("design_space");
  cfg.space = DesignSpace(sp.at("lower").get<double>(), sp.at("upper").get<double>());
  cfg.alpha = j.at("target_alpha").get<double>();
  cfg.n = j.value("n", 1);

  for (const json& c : j.value("candidates", json::array())) cfg.candidates.push_back(parse_model(c));
  if (j.contains("weights") && j.at("weights").contains("values"))
    cfg.weight_values = to_vector(j.at("weights").at("values"));
  if (j.contains("prior")) cfg.prior = parse_prior(j.at("prior"), cfg.space);
  if (j.contains("design")) cfg.design = parse_design(j.at("design"), cfg.space);

  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    if (o.contains("k_points")) {
      if (o.at("k_points").is_array()) {
        cfg.optimizer.k_min = o.at("k_points")[0].get<int>();
        cfg.optimizer.k_max = o.at("k_points")[1].get<int>();
      } else {
        cfg.k_fixed = o.at("k_points").get<int>();
        cfg.optimizer.k_min = cfg.optimizer.k_max = *cfg.k_fixed;
      }
    }
    cfg.optimizer.restarts = o.value("restarts", cfg.optimizer.restarts);
    cfg.optimizer.max_evals = o.value("max_evals", cfg.optimizer.max_evals);
    cfg.optimizer.merge_tol = o.value("merge_tol", cfg.optimizer.merge_tol);
    cfg.optimizer.weight_tol = o.value("weight_tol", cfg.optimizer.weight_tol);
    cfg.optimizer.seed = o.value("seed", cfg.optimizer.seed);
    cfg.optimizer.threads = o.value("threads", cfg.optimizer.threads);
    cfg.optimizer.rho_end = o.value("rho_end", cfg.optimizer.rho_end);
    const std::string strat = o.value("strategy", std::string("cobyla"));
    if (strat == "cobyla") cfg.optimizer.strategy = SearchStrategy::Cobyla;
    else if (strat == "neldermead") cfg.optimizer.strategy = SearchStrategy::NelderMead;
    else throw std::runtime_error("unknown strategy: " + strat);
  }

  if (j.contains("simulation")) {
    const json& s = j.at("simulation");
    RunConfig::Simulation sim;
    for (const json& t : s.at("truths"))
      sim.truths.push_back({t.at("id").get<std::string>(), parse_model(t)});
    for (const json& d : s.at("designs"))
      sim.designs.push_back({d.at("id").get<std::string>(), parse_design(d, cfg.space)});
    sim.n_list = s.at("n_list").get<std::vector<int>>();
    sim.reps = s.value("reps", 1000);
    sim.seed = s.value("seed", std::uint64_t{1});
    cfg.simulation = std::move(sim);
  }
  return cfg;
}

std::string serialize_config(const RunConfig& cfg) {
  json j;
  j["version"] = cfg.version;
  j["design_space"] = {{"lower", cfg.space.lower}, {"upper", cfg.space.upper}};
  j["target_alpha"] = cfg.alpha;
  j["n"] = cfg.n;
  json cands = json::array();
  for (const CandidateModel& c : cfg.candidates) cands.push_back(dump_model(c));
  j["candidates"] = cands;
  if (cfg.weight_values) j["weights"] = {{"values", from_vector(*cfg.weight_values)}};
  if (cfg.prior) {
    json atoms = json::array();
    for (const TruthPrior::Atom& a : cfg.prior->atoms) {
      json ja = dump_model(a.model);
      ja["prob"] = a.prob;
      atoms.push_back(ja);
    }
    j["prior"] = {{"atoms", atoms}};
  }
  if (cfg.design) j["design"] = dump_design(*cfg.design);

  json o;
  if (cfg.k_fixed) o["k_points"] = *cfg.k_fixed;
  else o["k_points"] = {cfg.optimizer.k_min, cfg.optimizer.k_max};
  o["restarts"] = cfg.optimizer.restarts;
  o["max_evals"] = cfg.optimizer.max_evals;
  o["merge_tol"] = cfg.optimizer.merge_tol;
  o["weight_tol"] = cfg.optimizer.weight_tol;
  o["seed"] = cfg.optimizer.seed;
  o["threads"] = cfg.optimizer.threads;
  o["rho_end"] = cfg.optimizer.rho_end;
  o["strategy"] = cfg.optimizer.strategy == SearchStrategy::Cobyla ? "cobyla" : "neldermead";
  j["optimizer"] = o;

  if (cfg.simulation) {
    json s;
    json truths = json::array();
    for (const NamedModel& t : cfg.simulation->truths) {
      json jt = dump_model(t.model);
      jt["id"] = t.id;
      truths.push_back(jt);
    }
    json designs = json::array();
    for (const NamedDesign& d : cfg.simulation->designs) {
      json jd = dump_design(d.design);
      jd["id"] = d.id;
      designs.push_back(jd);
    }
    s["truths"] = truths;
    s["designs"] = designs;
    s["n_list"] = cfg.simulation->n_list;
    s["reps"] = cfg.simulation->reps;
    s["seed"] = cfg.simulation->seed;
    j["simulation"] = s;
  }
  return j.dump(2) + "\n";
}

void save_config(const RunConfig& config, const std::filesystem::path& file) {
  atomic_write_text(file, serialize_config(config));
}

}  // namespace mavdes
