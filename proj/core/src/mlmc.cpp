#include "lrcv/mlmc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "lrcv/error.hpp"
#include "lrcv/parallel.hpp"
#include "lrcv/stats.hpp"

namespace lrcv::mlmc {

rng::InputSample draw(const models::LevelHierarchy& h, std::uint64_t seed, rng::Purpose purpose,
                      std::uint64_t index) {
  return rng::draw_input({seed, purpose, index}, h.inputs());
}

std::vector<double> LevelSamples::y_values() const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = y(i);
  return out;
}

double PilotResult::cost() const {
  double c = 0.0;
  for (const auto& s : stats) c += static_cast<double>(s.n_samples) * s.cost();
  return c;
}

LevelStats level_stats(const LevelSamples& s, std::size_t dof, std::size_t output_dim,
                       double unit_cost, double coarse_cost) {
  if (s.size() < kMinSamples) throw DataError("level statistics need at least 2 samples");
  LevelStats st;
  st.level = s.level;
  st.n_samples = s.size();
  st.dof = dof;
  st.output_dim = output_dim;
  const std::vector<double> y = s.y_values();
  const stats::Moments yq = stats::accumulate(y, s.fine);
  st.mean_y = yq.mean_y();
  st.var_y = yq.var_y();
  st.mean_q = yq.mean_z();
  st.var_q = yq.var_z();
  st.unit_cost = unit_cost;
  st.coarse_cost = coarse_cost;
  return st;
}

PilotResult pilot_mlmc(const models::LevelHierarchy& h, std::size_t n_pilot, std::uint64_t seed,
                       const SampleOptions& options) {
  if (n_pilot < kMinSamples) throw ConfigError("pilot needs at least 2 samples per level");
  const std::size_t levels = h.num_levels();
  PilotResult out;
  out.seed = seed;
  out.n_pilot = n_pilot;
  out.measured = options.measure_cost;

  std::vector<double> time_sum(levels, 0.0);
  std::vector<std::size_t> time_count(levels, 0);

  for (std::size_t l = 0; l < levels; ++l) {
    LevelSamples s;
    s.level = l;
    s.inputs.resize(n_pilot);
    s.fine.resize(n_pilot);
    if (l > 0) {
      s.coarse.resize(n_pilot);
      s.coarse_q.resize(n_pilot);
    }
    std::vector<double> t_fine(n_pilot, 0.0), t_coarse(n_pilot, 0.0);
    parallel_for(n_pilot, options.threads, [&](std::size_t i) {
      s.inputs[i] = draw(h, seed, rng::Purpose::pilot(static_cast<std::uint32_t>(l)), i);
      auto t0 = std::chrono::steady_clock::now();
      models::LevelOutput fine = h.evaluate(l, s.inputs[i]);
      auto t1 = std::chrono::steady_clock::now();
      s.fine[i] = fine.value;
      t_fine[i] = std::chrono::duration<double>(t1 - t0).count();
      if (l > 0) {
        t0 = std::chrono::steady_clock::now();
        models::LevelOutput coarse = h.evaluate(l - 1, s.inputs[i]);
        t1 = std::chrono::steady_clock::now();
        s.coarse[i] = coarse.value;
        s.coarse_q[i] = std::move(coarse.q);
        t_coarse[i] = std::chrono::duration<double>(t1 - t0).count();
      }
    });
    for (std::size_t i = 0; i < n_pilot; ++i) {
      time_sum[l] += t_fine[i];
      if (l > 0) time_sum[l - 1] += t_coarse[i];
    }
    time_count[l] += n_pilot;
    if (l > 0) time_count[l - 1] += n_pilot;
    out.samples.push_back(std::move(s));
  }

  out.unit_costs.resize(levels);
  for (std::size_t l = 0; l < levels; ++l) {
    if (options.measure_cost) {
      const double mean = time_sum[l] / static_cast<double>(time_count[l]);
      out.unit_costs[l] = std::max(mean, 1e-9);
    } else {
      out.unit_costs[l] = h.unit_cost(l);
    }
  }
  for (std::size_t l = 0; l < levels; ++l) {
    out.stats.push_back(level_stats(out.samples[l], h.dof(l), h.output_dim(l), out.unit_costs[l],
                                    l > 0 ? out.unit_costs[l - 1] : 0.0));
  }
  return out;
}

LogFit fit_loglog(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DataError("log-log fit needs at least 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DataError("log-log fit needs positive values");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  if (!(sxx > 0.0)) throw DataError("log-log fit needs distinct abscissae");
  LogFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = std::log(y[i]) - (f.intercept + f.slope * std::log(x[i]));
    rss += r * r;
  }
  f.residual = std::sqrt(rss / n);
  return f;
}

RateFit fit_rates(std::span<const LevelStats> stats) {
  RateFit fit;
  std::vector<double> ma, a, mb, b, mg, g;
  for (const auto& s : stats) {
    const auto m = static_cast<double>(s.dof);
    if (s.level >= 1 && std::abs(s.mean_y) > 0.0) {
      ma.push_back(m);
      a.push_back(std::abs(s.mean_y));
      fit.alpha_levels.push_back(s.level);
    }
    if (s.level >= 1 && s.var_y > 0.0) {
      mb.push_back(m);
      b.push_back(s.var_y);
      fit.beta_levels.push_back(s.level);
    }
    if (s.unit_cost > 0.0) {
      mg.push_back(m);
      g.push_back(s.unit_cost);
      fit.gamma_levels.push_back(s.level);
    }
  }
  if (a.size() < 2 || b.size() < 2 || g.size() < 2) {
    throw DataError("fit_rates: fewer than 2 usable levels");
  }
  const LogFit fa = fit_loglog(ma, a);
  const LogFit fb = fit_loglog(mb, b);
  const LogFit fg = fit_loglog(mg, g);
  fit.alpha = -fa.slope;
  fit.beta = -fb.slope;
  fit.gamma = fg.slope;
  fit.alpha_residual = fa.residual;
  fit.beta_residual = fb.residual;
  fit.gamma_residual = fg.residual;
  return fit;
}

std::size_t guarded_ceil(double x) {
  if (!(x > 0.0)) return 0;
  if (!std::isfinite(x) || x > 9.0e15) throw NumericalError("sample count overflow");
  const double c = std::ceil(x);
  if (c - 1.0 >= x * (1.0 - 1e-12)) return static_cast<std::size_t>(c - 1.0);
  return static_cast<std::size_t>(c);
}

double AllocationPlan::cost() const {
  double c = 0.0;
  for (std::size_t l = 0; l < n.size(); ++l) c += static_cast<double>(n[l]) * costs[l];
  return c;
}

double AllocationPlan::sampling_error() const {
  double e = 0.0;
  for (std::size_t l = 0; l < n.size(); ++l) e += variances[l] / static_cast<double>(n[l]);
  return e;
}

AllocationPlan allocate_mlmc(std::span<const double> variances, std::span<const double> costs,
                             double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be positive");
  if (variances.empty() || variances.size() != costs.size()) {
    throw DimensionError("allocate: need one variance and one cost per level");
  }
  AllocationPlan plan;
  plan.epsilon = epsilon;
  plan.variances.assign(variances.begin(), variances.end());
  plan.costs.assign(costs.begin(), costs.end());
  double s = 0.0;
  for (std::size_t l = 0; l < variances.size(); ++l) {
    if (!(variances[l] >= 0.0) || !std::isfinite(variances[l])) throw DataError("variances must be >= 0");
    if (!(costs[l] > 0.0) || !std::isfinite(costs[l])) throw DataError("costs must be positive");
    s += std::sqrt(variances[l] * costs[l]);
  }
  plan.all_zero_variance = !(s > 0.0);
  const double scale = 2.0 / (epsilon * epsilon) * s;
  plan.n.resize(variances.size());
  for (std::size_t l = 0; l < variances.size(); ++l) {
    const double x = scale * std::sqrt(variances[l] / costs[l]);
    plan.n[l] = std::max(kMinSamples, guarded_ceil(x));
  }
  return plan;
}

AllocationPlan allocate_mlmc(std::span<const LevelStats> stats, double epsilon) {
  std::vector<double> v, c;
  for (const auto& s : stats) {
    v.push_back(s.var_y);
    c.push_back(s.cost());
  }
  return allocate_mlmc(v, c, epsilon);
}

std::string method_name(Method m) {
  switch (m) {
    case Method::mc:
      return "mc";
    case Method::mlmc:
      return "mlmc";
    case Method::mlcv:
      return "mlcv";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "mc") return Method::mc;
  if (s == "mlmc") return Method::mlmc;
  if (s == "mlcv") return Method::mlcv;
  throw ConfigError("unknown method '" + name + "' (expected mc, mlmc or mlcv)");
}

namespace {

// Fresh Y_l samples [begin, end) of the main_y(l) stream.
std::vector<double> fresh_y(const models::LevelHierarchy& h, std::size_t level, std::uint64_t seed,
                            std::size_t begin, std::size_t end, unsigned threads) {
  std::vector<double> y(end - begin);
  parallel_for(y.size(), threads, [&](std::size_t i) {
    const auto xi = draw(h, seed, rng::Purpose::main_y(static_cast<std::uint32_t>(level)), begin + i);
    if (level == 0) {
      y[i] = h.evaluate(0, xi).value;
    } else {
      y[i] = models::evaluate_coupled(h, level, xi).y();
    }
  });
  return y;
}

void check_pilot(const models::LevelHierarchy& h, const PilotResult& pilot) {
  if (pilot.samples.size() != h.num_levels() || pilot.stats.size() != h.num_levels()) {
    throw ConfigError("pilot data does not match the hierarchy's levels");
  }
}

}  // namespace

EstimatorResult run_mlmc(const models::LevelHierarchy& h, const AllocationPlan& plan,
                         std::uint64_t seed, const PilotResult& pilot, const RunOptions& options) {
  check_pilot(h, pilot);
  if (plan.n.size() != h.num_levels()) throw ConfigError("plan does not cover every level");
  EstimatorResult res;
  res.method = Method::mlmc;
  res.epsilon = plan.epsilon;
  res.seed = seed;
  res.pilot_cost = pilot.cost();
  if (plan.all_zero_variance) res.warnings.push_back("all level variances are zero; N_min used everywhere");

  std::vector<std::vector<double>> ys(h.num_levels());
  for (std::size_t l = 0; l < h.num_levels(); ++l) {
    const LevelSamples& s = pilot.samples[l];
    ys[l] = s.y_values();
    const std::size_t target = std::max(plan.n[l], s.size());
    const auto extra = fresh_y(h, l, seed, 0, target - s.size(), options.threads);
    ys[l].insert(ys[l].end(), extra.begin(), extra.end());
  }

  std::vector<double> variances = plan.variances;
  std::vector<std::size_t> planned = plan.n;
  if (options.update_variances) {
    for (std::size_t l = 0; l < h.num_levels(); ++l) variances[l] = stats::sample_variance(ys[l]);
    const AllocationPlan updated = allocate_mlmc(variances, plan.costs, plan.epsilon);
    for (std::size_t l = 0; l < h.num_levels(); ++l) {
      planned[l] = updated.n[l];
      if (updated.n[l] > ys[l].size()) {
        const std::size_t have_new = ys[l].size() - pilot.samples[l].size();
        const auto extra = fresh_y(h, l, seed, have_new, have_new + updated.n[l] - ys[l].size(),
                                   options.threads);
        ys[l].insert(ys[l].end(), extra.begin(), extra.end());
      }
    }
  }

  for (std::size_t l = 0; l < h.num_levels(); ++l) {
    LevelRun lr;
    lr.level = l;
    lr.planned = planned[l];
    lr.n_used = ys[l].size();
    lr.n_recycled = pilot.samples[l].size();
    lr.n_new = lr.n_used - lr.n_recycled;
    const stats::Moments m = stats::accumulate(ys[l], ys[l]);
    lr.mean_y = m.mean_y();
    lr.partial = lr.mean_y;
    lr.var_y = options.update_variances ? m.var_y() : variances[l];
    lr.unit_cost = pilot.stats[l].unit_cost;
    lr.coarse_cost = pilot.stats[l].coarse_cost;
    lr.cost = static_cast<double>(lr.n_used) * (lr.unit_cost + lr.coarse_cost);
    res.sampling_error += lr.var_y / static_cast<double>(lr.n_used);
    res.cost += lr.cost;
    res.levels.push_back(lr);
  }
  for (const auto& lr : res.levels) res.estimate += lr.partial;
  return res;
}

EstimatorResult run_mc(const models::LevelHierarchy& h, double epsilon, std::uint64_t seed,
                       const PilotResult& pilot, const RunOptions& options) {
  check_pilot(h, pilot);
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  const std::size_t L = h.finest_level();
  const LevelStats& st = pilot.stats[L];
  const std::size_t n = std::max(kMinSamples, guarded_ceil(2.0 * st.var_q / (epsilon * epsilon)));

  std::vector<double> q = pilot.samples[L].fine;
  const std::size_t have = q.size();
  if (n > have) {
    std::vector<double> extra(n - have);
    parallel_for(extra.size(), options.threads, [&](std::size_t i) {
      const auto xi = draw(h, seed, rng::Purpose::main_y(static_cast<std::uint32_t>(L)), i);
      extra[i] = h.evaluate(L, xi).value;
    });
    q.insert(q.end(), extra.begin(), extra.end());
  }

  EstimatorResult res;
  res.method = Method::mc;
  res.epsilon = epsilon;
  res.seed = seed;
  LevelRun lr;
  lr.level = L;
  lr.planned = n;
  lr.n_used = q.size();
  lr.n_recycled = have;
  lr.n_new = lr.n_used - have;
  const stats::Moments m = stats::accumulate(q, q);
  lr.mean_y = m.mean_y();
  lr.partial = lr.mean_y;
  lr.var_y = options.update_variances ? m.var_y() : st.var_q;
  lr.unit_cost = st.unit_cost;
  lr.cost = static_cast<double>(lr.n_used) * lr.unit_cost;
  res.levels.push_back(lr);
  res.estimate = lr.partial;
  res.sampling_error = lr.var_y / static_cast<double>(lr.n_used);
  res.cost = lr.cost;
  res.pilot_cost = static_cast<double>(have) * lr.unit_cost;
  return res;
}

McReference mc_cost_reference(double var_q, double unit_cost, double epsilon) {
  if (!(var_q > 0.0)) throw DataError("mc_cost_reference: V[Q_L] must be positive");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  McReference r;
  r.n = guarded_ceil(2.0 * var_q / (epsilon * epsilon));
  r.cost = static_cast<double>(r.n) * unit_cost;
  return r;
}

McReference mc_cost_reference(const LevelStats& finest, double epsilon) {
  return mc_cost_reference(finest.var_q, finest.unit_cost, epsilon);
}

BiasCheck check_bias(std::span<const LevelStats> stats, const RateFit& fit, double epsilon) {
  BiasCheck b;
  if (stats.size() < 2 || !(fit.alpha > 0.0)) return b;
  const LevelStats& last = stats.back();
  const LevelStats& prev = stats[stats.size() - 2];
  const double s = static_cast<double>(last.dof) / static_cast<double>(prev.dof);
  const double denom = std::pow(s, fit.alpha) - 1.0;
  if (!(denom > 0.0)) return b;
  b.available = true;
  b.estimate = std::abs(last.mean_y) / denom;
  b.limit = epsilon / std::sqrt(2.0);
  b.violated = b.estimate > b.limit;
  return b;
}

}  // namespace lrcv::mlmc
