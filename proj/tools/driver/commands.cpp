#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "driver.hpp"
#include "lrcv/basis_io.hpp"
#include "lrcv/error.hpp"

namespace lrcv::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write " + file.string());
  os << text;
}

void write_json(const fs::path& file, const json& j) { write_text(file, j.dump(2) + "\n"); }

std::string csv_num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

fs::path samples_file(const RunConfig& cfg) { return cfg.output_dir / "pilot_samples.json"; }

std::string model_hash(const models::LevelHierarchy& h) {
  return models::hex64(models::fnv1a64(h.fingerprint()));
}

// Everything the cached pilot samples depend on.
std::string pilot_key(const RunConfig& cfg, const models::LevelHierarchy& h) {
  json k = {{"model", h.fingerprint()},
            {"pilot_samples", cfg.pilot_samples},
            {"seed", cfg.master_seed},
            {"cost_mode", cfg.cost_mode == CostMode::declared ? "declared" : "measured"}};
  return models::hex64(models::fnv1a64(k.dump()));
}

json samples_to_json(const RunConfig& cfg, const models::LevelHierarchy& h, const mlmc::PilotResult& p) {
  json doc;
  doc["format"] = "lrcv-pilot-samples";
  doc["version"] = 1;
  doc["pilot_key"] = pilot_key(cfg, h);
  doc["seed"] = p.seed;
  doc["n_pilot"] = p.n_pilot;
  doc["measured"] = p.measured;
  doc["unit_costs"] = p.unit_costs;
  json levels = json::array();
  for (const auto& s : p.samples) {
    json l;
    l["level"] = s.level;
    json inputs = json::array();
    for (const auto& xi : s.inputs) inputs.push_back(xi.values);
    l["inputs"] = std::move(inputs);
    l["fine"] = s.fine;
    l["coarse"] = s.coarse;
    json cq = json::array();
    for (const auto& q : s.coarse_q) cq.push_back(std::vector<double>(q.data(), q.data() + q.size()));
    l["coarse_q"] = std::move(cq);
    levels.push_back(std::move(l));
  }
  doc["levels"] = std::move(levels);
  return doc;
}

mlmc::PilotResult samples_from_json(const RunConfig& cfg, const models::LevelHierarchy& h, const json& doc) {
  if (doc.value("format", "") != "lrcv-pilot-samples" || doc.value("version", 0) != 1) {
    throw DataError("pilot_samples.json: unknown format");
  }
  if (doc.at("pilot_key").get<std::string>() != pilot_key(cfg, h)) {
    throw ConfigError("pilot artifacts in " + cfg.output_dir.string() +
                      " were produced with a different model, seed, pilot size or cost mode; "
                      "run `lrcv pilot` again");
  }
  mlmc::PilotResult p;
  p.seed = doc.at("seed").get<std::uint64_t>();
  p.n_pilot = doc.at("n_pilot").get<std::size_t>();
  p.measured = doc.at("measured").get<bool>();
  p.unit_costs = doc.at("unit_costs").get<std::vector<double>>();
  const json& levels = doc.at("levels");
  if (levels.size() != h.num_levels() || p.unit_costs.size() != h.num_levels()) {
    throw DataError("pilot_samples.json: level count does not match the model");
  }
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const json& j = levels[l];
    mlmc::LevelSamples s;
    s.level = l;
    for (const auto& v : j.at("inputs")) s.inputs.push_back({v.get<std::vector<double>>()});
    s.fine = j.at("fine").get<std::vector<double>>();
    s.coarse = j.at("coarse").get<std::vector<double>>();
    for (const auto& v : j.at("coarse_q")) {
      const auto q = v.get<std::vector<double>>();
      s.coarse_q.push_back(Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size())));
    }
    p.stats.push_back(mlmc::level_stats(s, h.dof(l), h.output_dim(l), p.unit_costs[l],
                                        l > 0 ? p.unit_costs[l - 1] : 0.0));
    p.samples.push_back(std::move(s));
  }
  return p;
}

mlcv::BasisKey basis_key(const RunConfig& cfg, const models::LevelHierarchy& h, std::size_t level) {
  return {model_hash(h), level, cfg.master_seed, cfg.pilot_samples, cfg.rank_policy.for_level(level).describe()};
}

fs::path basis_file(const RunConfig& cfg, std::size_t level) {
  return cfg.output_dir / "bases" / ("level_" + std::to_string(level) + ".json");
}

std::vector<std::optional<mlcv::ReducedBasisPair>> obtain_bases(const RunConfig& cfg,
                                                                const models::LevelHierarchy& h,
                                                                const mlmc::PilotResult& pilot,
                                                                bool build_missing, std::ostream& log) {
  std::vector<std::optional<mlcv::ReducedBasisPair>> bases(h.num_levels());
  for (std::size_t l = 1; l < h.num_levels(); ++l) {
    const auto key = basis_key(cfg, h, l);
    const auto file = basis_file(cfg, l);
    mlcv::CachedBasis cached = mlcv::load_basis(file, key);
    if (cached.found) {
      bases[l] = std::move(cached.basis);
      continue;
    }
    if (!build_missing) {
      throw ConfigError("no cached basis for level " + std::to_string(l) + " in " +
                        (cfg.output_dir / "bases").string() + "; run `lrcv pilot` first");
    }
    try {
      bases[l] = mlcv::build_reduced_basis(h, l, pilot.samples[l], cfg.rank_policy.for_level(l));
    } catch (const DimensionError& e) {
      throw ConfigError(std::string("rank_policy: ") + e.what());
    }
    mlcv::save_basis(file, key, bases[l]);
    log << "built basis for level " << l << " (rank " << (bases[l] ? bases[l]->rank : 0) << ")\n";
  }
  return bases;
}

struct State {
  std::shared_ptr<const models::LevelHierarchy> h;
  mlcv::MlcvPilot mp;
};

std::shared_ptr<const models::LevelHierarchy> with_costs(std::shared_ptr<const models::LevelHierarchy> h,
                                                         const mlmc::PilotResult& p) {
  if (!p.measured) return h;
  return std::make_shared<models::CostOverride>(h, p.unit_costs);
}

State load_state(const RunConfig& cfg, std::ostream& log) {
  State st;
  auto model = make_hierarchy(cfg);
  std::ifstream is(samples_file(cfg), std::ios::binary);
  if (!is) {
    throw ConfigError("pilot artifacts not found in " + cfg.output_dir.string() +
                      "; run `lrcv pilot <config>` first");
  }
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::exception& e) {
    throw DataError(std::string("pilot_samples.json: ") + e.what());
  }
  mlmc::PilotResult pilot = samples_from_json(cfg, *model, doc);
  st.h = with_costs(model, pilot);
  auto bases = obtain_bases(cfg, *st.h, pilot, false, log);
  st.mp = mlcv::assemble_mlcv(*st.h, std::move(pilot), std::move(bases), cfg.s2, cfg.threads);
  return st;
}

json rates_json(const mlmc::PilotResult& p, std::vector<std::string>& warnings) {
  try {
    const auto fit = mlmc::fit_rates(p.stats);
    return {{"alpha", fit.alpha},
            {"beta", fit.beta},
            {"gamma", fit.gamma},
            {"alpha_levels", fit.alpha_levels},
            {"beta_levels", fit.beta_levels},
            {"gamma_levels", fit.gamma_levels},
            {"alpha_residual", fit.alpha_residual},
            {"beta_residual", fit.beta_residual},
            {"gamma_residual", fit.gamma_residual}};
  } catch (const DataError& e) {
    warnings.push_back(std::string("rate fit unavailable: ") + e.what());
    return nullptr;
  }
}

json bias_json(const mlmc::PilotResult& p, double eps, std::vector<std::string>& warnings) {
  mlmc::RateFit fit;
  try {
    fit = mlmc::fit_rates(p.stats);
  } catch (const DataError&) {
    return nullptr;
  }
  const auto b = mlmc::check_bias(p.stats, fit, eps);
  if (!b.available) return nullptr;
  if (b.violated) {
    warnings.push_back("epsilon " + format_double(eps) + ": estimated discretization error " +
                       format_double(b.estimate) + " exceeds eps/sqrt(2) = " + format_double(b.limit));
  }
  return {{"estimate", b.estimate}, {"limit", b.limit}, {"violated", b.violated}};
}

json mc_reference_json(const mlmc::PilotResult& p, double eps) {
  const auto& last = p.stats.back();
  if (!(last.var_q > 0.0)) return nullptr;
  const auto ref = mlmc::mc_cost_reference(last, eps);
  return {{"n", ref.n}, {"cost", ref.cost}};
}

std::vector<std::size_t> absolute_levels(const RunConfig& cfg, const models::LevelHierarchy& h) {
  if (!cfg.levels.empty()) return cfg.levels;
  std::vector<std::size_t> out(h.num_levels());
  for (std::size_t l = 0; l < out.size(); ++l) out[l] = l;
  return out;
}

std::string levels_label(const std::vector<std::size_t>& levels) {
  std::string s;
  for (std::size_t i = 0; i < levels.size(); ++i) s += (i ? ";" : "") + std::to_string(levels[i]);
  return s;
}

std::string provenance(const RunConfig& cfg) {
  return "# seed=" + std::to_string(cfg.master_seed) + ", config_hash=" + cfg.hash();
}

}  // namespace

void cmd_pilot(const RunConfig& cfg, std::ostream& log) {
  auto model = make_hierarchy(cfg);
  mlmc::SampleOptions opts;
  opts.threads = cfg.threads;
  opts.measure_cost = cfg.cost_mode == CostMode::measured;
  mlmc::PilotResult pilot = mlmc::pilot_mlmc(*model, cfg.pilot_samples, cfg.master_seed, opts);
  auto h = with_costs(model, pilot);
  write_json(samples_file(cfg), samples_to_json(cfg, *model, pilot));

  auto bases = obtain_bases(cfg, *h, pilot, true, log);
  const mlcv::MlcvPilot mp = mlcv::assemble_mlcv(*h, std::move(pilot), std::move(bases), cfg.s2, cfg.threads);
  const mlmc::PilotResult& p = mp.pilot;

  std::vector<std::string> warnings;
  if (cfg.pilot_samples < h->output_dim(0)) {
    warnings.push_back("pilot size is below m_0; N_p >= m_{l-1} is recommended for the basis");
  }
  const auto abs_levels = absolute_levels(cfg, *h);

  json rows = json::array();
  for (std::size_t l = 0; l < h->num_levels(); ++l) {
    const auto& s = p.stats[l];
    const auto& cv = mp.cv[l];
    json r = {{"level", abs_levels[l]},
              {"M", s.dof},
              {"m", s.output_dim},
              {"n_samples", s.n_samples},
              {"mean_y", s.mean_y},
              {"var_y", s.var_y},
              {"mean_q", s.mean_q},
              {"var_q", s.var_q},
              {"unit_cost", s.unit_cost},
              {"cost", s.cost()}};
    if (l > 0) {
      const auto& b = mp.bases[l];
      r["rank"] = b ? b->rank : 0;
      r["id_residual"] = b ? json(b->id_residual) : json(nullptr);
      r["selected"] = b ? json(b->selected) : json::array();
      r["rho2"] = cv.rho2;
      r["rho2_degenerate"] = cv.degenerate;
      r["cov_yz"] = cv.cov_yz;
      r["var_z"] = cv.var_z;
      r["zeta"] = cv.zeta;
      r["s1"] = std::isfinite(cv.rule.s1) ? json(cv.rule.s1) : json("inf");
      r["multiplier"] = cv.rule.multiplier;
      r["cv_enabled"] = cv.enabled();
    }
    rows.push_back(std::move(r));
  }

  json plans = json::array();
  for (double eps : cfg.epsilons) {
    const auto mlmc_plan = mlmc::allocate_mlmc(p.stats, eps);
    const auto mlcv_plan = mlcv::plan_mlcv(mp, eps);
    json pl;
    pl["epsilon"] = eps;
    pl["mlmc"] = {{"n", mlmc_plan.n}, {"cost", mlmc_plan.cost()}, {"sampling_error", mlmc_plan.sampling_error()}};
    pl["mlcv"] = {{"n_tilde", mlcv_plan.tilde.n},
                  {"n_prime", mlcv_plan.n_prime},
                  {"rank", mlcv_plan.rank},
                  {"ratio", mlcv_plan.ratio},
                  {"cost", mlcv_plan.cost()},
                  {"sampling_error", mlcv_plan.tilde.sampling_error()}};
    pl["mc_reference"] = mc_reference_json(p, eps);
    pl["cost_ratio"] = mlcv_plan.cost() / mlmc_plan.cost();
    pl["bias_check"] = bias_json(p, eps, warnings);
    if (mlmc_plan.all_zero_variance) warnings.push_back("all level variances are zero");
    plans.push_back(std::move(pl));
  }

  json report;
  report["command"] = "pilot";
  report["seed"] = cfg.master_seed;
  report["config_hash"] = cfg.hash();
  report["config"] = cfg.echo();
  report["model"] = {{"name", h->name()}, {"fingerprint", h->fingerprint()}, {"hash", model_hash(*h)}};
  report["pilot_cost"] = p.cost();
  report["levels"] = std::move(rows);
  report["rates"] = rates_json(p, warnings);
  report["plans"] = std::move(plans);
  report["warnings"] = warnings;
  write_json(cfg.output_dir / "pilot.json", report);
  for (const auto& w : warnings) log << "warning: " << w << "\n";
  log << "pilot: wrote " << (cfg.output_dir / "pilot.json").string() << "\n";
}

void cmd_estimate(const RunConfig& cfg, std::optional<mlmc::Method> method, std::ostream& log) {
  const State st = load_state(cfg, log);
  const auto& h = *st.h;
  const mlmc::PilotResult& p = st.mp.pilot;
  const auto abs_levels = absolute_levels(cfg, h);
  const std::vector<mlmc::Method> methods = method ? std::vector<mlmc::Method>{*method} : cfg.methods;

  for (mlmc::Method m : methods) {
    for (double eps : cfg.epsilons) {
      mlmc::EstimatorResult res;
      mlmc::RunOptions ro{cfg.threads, cfg.update_variances};
      const auto mlmc_plan = mlmc::allocate_mlmc(p.stats, eps);
      const auto mlcv_plan = mlcv::plan_mlcv(st.mp, eps);
      switch (m) {
        case mlmc::Method::mc:
          res = mlmc::run_mc(h, eps, cfg.master_seed, p, ro);
          break;
        case mlmc::Method::mlmc:
          res = mlmc::run_mlmc(h, mlmc_plan, cfg.master_seed, p, ro);
          break;
        case mlmc::Method::mlcv:
          res = mlcv::run_mlcv(h, st.mp, mlcv_plan, cfg.master_seed, {cfg.threads});
          break;
      }

      json rows = json::array();
      std::ostringstream csv;
      csv << provenance(cfg) << ", method=" << mlmc::method_name(m) << ", epsilon=" << format_double(eps) << "\n";
      csv << "level,M,m,mean_y,var_y,rho2,mserf,planned,n_used,n_recycled,n_new,n_prime,n_basis,theta,zbar,partial,cost,cost_share\n";
      double cost_sum = 0.0;
      for (const auto& lr : res.levels) cost_sum += lr.cost;
      std::vector<double> partials, y_partials;
      for (const auto& lr : res.levels) {
        const double share = cost_sum > 0.0 ? lr.cost / cost_sum : 0.0;
        const std::size_t abs = abs_levels[lr.level];
        rows.push_back({{"level", abs},
                        {"M", h.dof(lr.level)},
                        {"m", h.output_dim(lr.level)},
                        {"mean_y", lr.mean_y},
                        {"var_y", lr.var_y},
                        {"rho2", lr.rho2},
                        {"mserf", lr.mserf},
                        {"planned", lr.planned},
                        {"n_used", lr.n_used},
                        {"n_recycled", lr.n_recycled},
                        {"n_new", lr.n_new},
                        {"n_prime", lr.n_prime},
                        {"n_basis", lr.n_basis},
                        {"theta", lr.theta},
                        {"zbar", lr.zbar},
                        {"ratio", lr.ratio},
                        {"cv_enabled", lr.cv_enabled},
                        {"below_rank", lr.below_rank},
                        {"partial", lr.partial},
                        {"cost", lr.cost},
                        {"cost_share", share}});
        csv << abs << ',' << h.dof(lr.level) << ',' << h.output_dim(lr.level) << ',' << csv_num(lr.mean_y) << ','
            << csv_num(lr.var_y) << ',' << csv_num(lr.rho2) << ',' << csv_num(lr.mserf) << ',' << lr.planned << ','
            << lr.n_used << ',' << lr.n_recycled << ',' << lr.n_new << ',' << lr.n_prime << ',' << lr.n_basis << ','
            << csv_num(lr.theta) << ',' << csv_num(lr.zbar) << ',' << csv_num(lr.partial) << ','
            << csv_num(lr.cost) << ',' << csv_num(share) << "\n";
        partials.push_back(lr.partial);
        y_partials.push_back(lr.mean_y);
      }

      std::vector<std::string> warnings = res.warnings;
      json totals = {{"estimate", res.estimate},
                     {"sampling_error", res.sampling_error},
                     {"sampling_error_target", eps * eps / 2.0},
                     {"cost", res.cost},
                     {"pilot_cost", res.pilot_cost},
                     {"mc_reference", mc_reference_json(p, eps)},
                     {"plan_cost_mlmc", mlmc_plan.cost()},
                     {"plan_cost_mlcv", mlcv_plan.cost()},
                     {"plan_cost_ratio_mlcv_mlmc", mlcv_plan.cost() / mlmc_plan.cost()}};
      if (m == mlmc::Method::mlcv && mlcv_plan.cost() > mlmc_plan.cost()) {
        warnings.push_back("MLCV plan is more expensive than MLMC at this epsilon");
      }

      json report;
      report["command"] = "estimate";
      report["method"] = mlmc::method_name(m);
      report["epsilon"] = eps;
      report["seed"] = cfg.master_seed;
      report["config_hash"] = cfg.hash();
      report["config"] = cfg.echo();
      report["levels"] = std::move(rows);
      report["totals"] = std::move(totals);
      report["rates"] = rates_json(p, warnings);
      report["bias_check"] = bias_json(p, eps, warnings);
      if (cfg.reference) {
        report["relative_error"] = {{"reference", *cfg.reference},
                                    {"estimator", mlcv::relative_error_curves(partials, *cfg.reference)},
                                    {"plain_y", mlcv::relative_error_curves(y_partials, *cfg.reference)}};
      }
      report["warnings"] = warnings;

      const std::string tag = mlmc::method_name(m) + "_" + format_double(eps);
      write_json(cfg.output_dir / ("report_" + tag + ".json"), report);
      write_text(cfg.output_dir / ("levels_" + tag + ".csv"), csv.str());
      for (const auto& w : warnings) log << "warning: " << w << "\n";
      log << mlmc::method_name(m) << " eps=" << format_double(eps) << " estimate=" << csv_num(res.estimate)
          << " cost=" << csv_num(res.cost) << "\n";
    }
  }
}

void cmd_compare(const RunConfig& cfg, std::ostream& log) {
  const State st = load_state(cfg, log);
  const mlmc::PilotResult& p = st.mp.pilot;
  const std::string label = levels_label(absolute_levels(cfg, *st.h));
  std::ostringstream csv;
  csv << provenance(cfg) << "\n";
  csv << "epsilon,levels,cost_mc,cost_mlmc,cost_mlcv,ratio\n";
  for (double eps : cfg.epsilons) {
    const auto mlmc_plan = mlmc::allocate_mlmc(p.stats, eps);
    const auto mlcv_plan = mlcv::plan_mlcv(st.mp, eps);
    double cost_mc = 0.0;
    if (p.stats.back().var_q > 0.0) {
      cost_mc = mlmc::mc_cost_reference(p.stats.back(), eps).cost;
    } else {
      log << "warning: V[Q_L] is zero; MC reference cost reported as 0\n";
    }
    const double ratio = mlcv_plan.cost() / mlmc_plan.cost();
    if (ratio > 1.0) {
      log << "warning: eps=" << format_double(eps) << ": MLCV/MLMC cost ratio " << csv_num(ratio)
          << " exceeds 1 (basis and N' overhead dominate)\n";
    }
    csv << format_double(eps) << ',' << label << ',' << csv_num(cost_mc) << ',' << csv_num(mlmc_plan.cost())
        << ',' << csv_num(mlcv_plan.cost()) << ',' << csv_num(ratio) << "\n";
  }
  write_text(cfg.output_dir / "compare.csv", csv.str());
  log << "compare: wrote " << (cfg.output_dir / "compare.csv").string() << "\n";
}

}  // namespace lrcv::cli
