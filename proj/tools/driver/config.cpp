#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "driver.hpp"
#include "lrcv/diffusion.hpp"
#include "lrcv/error.hpp"
#include "lrcv/synthetic.hpp"

namespace lrcv::cli {

using nlohmann::json;

std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string index_path(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path + ": " + msg);
}

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

double as_positive(const json& j, const std::string& path) {
  const double v = as_double(j, path);
  if (!(v > 0.0)) fail(path, "must be positive");
  return v;
}

std::uint64_t as_uint(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    if (j.get<std::int64_t>() < 0) fail(path, "must be non-negative");
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  fail(path, "expected a non-negative integer");
}

std::size_t as_count(const json& j, const std::string& path, std::size_t min = 1) {
  const auto v = as_uint(j, path);
  if (v < min) fail(path, "must be >= " + std::to_string(min));
  return static_cast<std::size_t>(v);
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

// Object reader that rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "config" : path_, "expected an object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* v = get(key);
    if (!v) fail(join(path_, key), "required field is missing");
    return *v;
  }

  std::string path(const std::string& key) const { return join(path_, key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(join(path_, it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

models::SyntheticParams parse_synthetic(const json& j, const std::string& path) {
  models::SyntheticParams p;
  Fields f(j, path);
  if (auto v = f.get("rank")) p.rank = as_count(*v, f.path("rank"));
  if (auto v = f.get("input_dim")) p.input_dim = as_count(*v, f.path("input_dim"));
  if (auto v = f.get("m0")) p.m0 = as_count(*v, f.path("m0"));
  if (auto v = f.get("refinement")) p.refinement = as_count(*v, f.path("refinement"), 2);
  if (auto v = f.get("levels")) p.levels = as_count(*v, f.path("levels"));
  if (auto v = f.get("delta")) {
    p.delta = as_double(*v, f.path("delta"));
    if (p.delta < 0.0) fail(f.path("delta"), "must be >= 0");
  }
  if (auto v = f.get("cost_exponent")) p.cost_exponent = as_positive(*v, f.path("cost_exponent"));
  f.finish();
  if (p.rank > p.m0) fail(path + ".rank", "must not exceed m0");
  return p;
}

models::DiffusionParams parse_diffusion(const json& j, const std::string& path) {
  models::DiffusionParams p;
  Fields f(j, path);
  if (auto v = f.get("kernel")) {
    Fields k(*v, f.path("kernel"));
    const std::string type = as_string(k.require("type"), k.path("type"));
    const double var = as_positive(k.require("variance"), k.path("variance"));
    if (type == "squared_exponential") {
      p.kernel = models::Kernel::squared_exponential(var, as_positive(k.require("length"), k.path("length")));
    } else if (type == "exponential") {
      p.kernel = models::Kernel::exponential(var, as_positive(k.require("length"), k.path("length")));
    } else {
      fail(k.path("type"), "expected squared_exponential or exponential");
    }
    k.finish();
  }
  if (auto v = f.get("kl_modes")) p.kl_modes = as_count(*v, f.path("kl_modes"));
  if (auto v = f.get("kl_grid")) p.kl_grid = as_count(*v, f.path("kl_grid"), 2);
  if (auto v = f.get("abar")) {
    p.abar = as_double(*v, f.path("abar"));
    if (p.abar < 0.0) fail(f.path("abar"), "must be >= 0");
  }
  if (auto v = f.get("field_scale")) p.field_scale = as_double(*v, f.path("field_scale"));
  if (auto v = f.get("input")) {
    try {
      p.input = rng::parse_distribution(as_string(*v, f.path("input")));
    } catch (const ConfigError& e) {
      fail(f.path("input"), e.what());
    }
  }
  if (auto v = f.get("base_cells")) p.base_cells = as_count(*v, f.path("base_cells"), 3);
  if (auto v = f.get("refinement")) p.refinement = as_count(*v, f.path("refinement"), 2);
  if (auto v = f.get("levels")) p.levels = as_count(*v, f.path("levels"));
  if (auto v = f.get("qoi")) {
    const std::string q = as_string(*v, f.path("qoi"));
    if (q == "integral_of_u") {
      p.qoi = models::DiffusionQoi::integral_of_u;
    } else if (q == "flux_at_left") {
      p.qoi = models::DiffusionQoi::flux_at_left;
    } else {
      fail(f.path("qoi"), "expected integral_of_u or flux_at_left");
    }
  }
  if (auto v = f.get("cost_exponent")) p.cost_exponent = as_positive(*v, f.path("cost_exponent"));
  f.finish();
  if (p.kl_modes > p.kl_grid) fail(path + ".kl_modes", "must not exceed kl_grid");
  return p;
}

struct DeterministicParams {
  std::vector<double> values;
  std::size_t input_dim = 1;
  std::size_t m0 = 4;
};

DeterministicParams parse_deterministic(const json& j, const std::string& path) {
  DeterministicParams p;
  Fields f(j, path);
  const json& vals = f.require("values");
  if (!vals.is_array() || vals.empty()) fail(f.path("values"), "expected a non-empty array");
  for (std::size_t i = 0; i < vals.size(); ++i) p.values.push_back(as_double(vals[i], index_path(f.path("values"), i)));
  if (auto v = f.get("input_dim")) p.input_dim = as_count(*v, f.path("input_dim"));
  if (auto v = f.get("m0")) p.m0 = as_count(*v, f.path("m0"));
  f.finish();
  return p;
}

std::shared_ptr<const models::LevelHierarchy> build_model(const std::string& name, const json& params) {
  if (name == "synthetic_low_rank") {
    return std::make_shared<models::SyntheticLowRank>(parse_synthetic(params, "model.params"));
  }
  if (name == "diffusion_1d") {
    return std::make_shared<models::Diffusion1D>(parse_diffusion(params, "model.params"));
  }
  if (name == "deterministic") {
    auto p = parse_deterministic(params, "model.params");
    return std::make_shared<models::DeterministicHierarchy>(p.values, p.input_dim, p.m0);
  }
  fail("model.name", "unknown model '" + name + "' (expected synthetic_low_rank, diffusion_1d or deterministic)");
}

std::size_t model_levels(const std::string& name, const json& params) {
  if (name == "synthetic_low_rank") return parse_synthetic(params, "model.params").levels;
  if (name == "diffusion_1d") return parse_diffusion(params, "model.params").levels;
  if (name == "deterministic") return parse_deterministic(params, "model.params").values.size();
  fail("model.name", "unknown model '" + name + "' (expected synthetic_low_rank, diffusion_1d or deterministic)");
}

}  // namespace

linalg::Termination RankPolicy::for_level(std::size_t level) const {
  if (kind == Kind::tolerance) return linalg::Termination::tol(tolerance);
  if (ranks.size() == 1) return linalg::Termination::fixed(ranks[0]);
  if (level < 1 || level > ranks.size()) throw ConfigError("rank_policy.fixed: no rank for level " + std::to_string(level));
  return linalg::Termination::fixed(ranks[level - 1]);
}

json RunConfig::echo() const {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["model"] = {{"name", model_name}, {"params", model_params}};
  j["levels"] = levels;
  json eps = json::array();
  for (double e : epsilons) eps.push_back(e);
  j["epsilons"] = eps;
  json m = json::array();
  for (auto x : methods) m.push_back(mlmc::method_name(x));
  j["methods"] = m;
  if (rank_policy.kind == RankPolicy::Kind::fixed) {
    j["rank_policy"] = {{"fixed", rank_policy.ranks}};
  } else {
    j["rank_policy"] = {{"tolerance", rank_policy.tolerance}};
  }
  j["s2"] = s2;
  j["pilot_samples"] = pilot_samples;
  j["master_seed"] = master_seed;
  j["cost_mode"] = cost_mode == CostMode::declared ? "declared" : "measured";
  j["update_variances"] = update_variances;
  if (reference) j["reference"] = *reference;
  return j;
}

std::string RunConfig::hash() const { return models::hex64(models::fnv1a64(echo().dump())); }

RunConfig parse_config(const json& doc) {
  RunConfig c;
  Fields f(doc, "");
  const auto version = as_uint(f.require("schema_version"), "schema_version");
  if (version != kSchemaVersion) {
    fail("schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                               std::to_string(kSchemaVersion) + ")");
  }

  {
    Fields m(f.require("model"), "model");
    c.model_name = as_string(m.require("name"), "model.name");
    if (auto p = m.get("params")) c.model_params = *p;
    m.finish();
  }
  const std::size_t available = model_levels(c.model_name, c.model_params);

  if (auto v = f.get("levels")) {
    if (!v->is_array() || v->empty()) fail("levels", "expected a non-empty array of level indices");
    for (std::size_t i = 0; i < v->size(); ++i) {
      const auto l = static_cast<std::size_t>(as_uint((*v)[i], index_path("levels", i)));
      if (l >= available) fail(index_path("levels", i), "level " + std::to_string(l) + " does not exist");
      if (!c.levels.empty() && l <= c.levels.back()) fail("levels", "must be strictly increasing");
      c.levels.push_back(l);
    }
  }
  const std::size_t n_levels = c.levels.empty() ? available : c.levels.size();

  {
    const json& e = f.require("epsilons");
    if (!e.is_array() || e.empty()) fail("epsilons", "expected a non-empty array");
    for (std::size_t i = 0; i < e.size(); ++i) c.epsilons.push_back(as_positive(e[i], index_path("epsilons", i)));
  }

  if (auto v = f.get("methods")) {
    if (!v->is_array() || v->empty()) fail("methods", "expected a non-empty array");
    for (std::size_t i = 0; i < v->size(); ++i) {
      try {
        c.methods.push_back(mlmc::parse_method(as_string((*v)[i], index_path("methods", i))));
      } catch (const ConfigError& ex) {
        fail(index_path("methods", i), ex.what());
      }
    }
  } else {
    c.methods = {mlmc::Method::mc, mlmc::Method::mlmc, mlmc::Method::mlcv};
  }

  if (auto v = f.get("rank_policy")) {
    Fields r(*v, "rank_policy");
    const json* fixed = r.get("fixed");
    const json* tol = r.get("tolerance");
    r.finish();
    if ((fixed != nullptr) == (tol != nullptr)) fail("rank_policy", "give exactly one of fixed or tolerance");
    if (fixed) {
      c.rank_policy.kind = RankPolicy::Kind::fixed;
      if (fixed->is_array()) {
        if (fixed->size() + 1 != n_levels) {
          fail("rank_policy.fixed", "expected " + std::to_string(n_levels - 1) + " ranks (one per level l >= 1)");
        }
        for (std::size_t i = 0; i < fixed->size(); ++i) {
          c.rank_policy.ranks.push_back(as_count((*fixed)[i], index_path("rank_policy.fixed", i)));
        }
      } else {
        c.rank_policy.ranks.push_back(as_count(*fixed, "rank_policy.fixed"));
      }
    } else {
      c.rank_policy.kind = RankPolicy::Kind::tolerance;
      c.rank_policy.tolerance = as_positive(*tol, "rank_policy.tolerance");
    }
  } else {
    c.rank_policy.ranks = {10};
  }

  if (auto v = f.get("s2")) {
    c.s2 = as_double(*v, "s2");
    if (!(c.s2 > 1.0)) fail("s2", "must be greater than 1");
  }
  if (auto v = f.get("pilot_samples")) c.pilot_samples = as_count(*v, "pilot_samples", 2);
  if (auto v = f.get("master_seed")) c.master_seed = as_uint(*v, "master_seed");
  if (auto v = f.get("cost_mode")) {
    const std::string m = as_string(*v, "cost_mode");
    if (m == "declared") {
      c.cost_mode = CostMode::declared;
    } else if (m == "measured") {
      c.cost_mode = CostMode::measured;
    } else {
      fail("cost_mode", "expected declared or measured");
    }
  }
  if (auto v = f.get("output_dir")) c.output_dir = as_string(*v, "output_dir");
  if (auto v = f.get("threads")) c.threads = static_cast<unsigned>(as_uint(*v, "threads"));
  if (auto v = f.get("update_variances")) c.update_variances = as_bool(*v, "update_variances");
  if (auto v = f.get("reference")) {
    c.reference = as_double(*v, "reference");
    if (*c.reference == 0.0) fail("reference", "must be nonzero");
  }
  f.finish();
  return c;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw ConfigError("cannot open config file " + file.string());
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(file.string() + ": invalid JSON: " + e.what());
  }
  return parse_config(doc);
}

void apply_overrides(RunConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.master_seed = *o.seed;
  if (o.out_dir) cfg.output_dir = *o.out_dir;
  if (o.threads) cfg.threads = *o.threads;
}

std::shared_ptr<const models::LevelHierarchy> make_hierarchy(const RunConfig& cfg) {
  auto base = build_model(cfg.model_name, cfg.model_params);
  std::shared_ptr<const models::LevelHierarchy> h = base;
  if (!cfg.levels.empty() && cfg.levels.size() != base->num_levels()) {
    h = std::make_shared<models::LevelSubset>(base, cfg.levels);
  }
  models::validate(*h);
  return h;
}

}  // namespace lrcv::cli
