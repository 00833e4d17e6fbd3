#include "lrcv/mlcv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lrcv/error.hpp"
#include "lrcv/parallel.hpp"
#include "lrcv/stats.hpp"

namespace lrcv::mlcv {

ReducedBasisPair ReducedBasisPair::from_parts(std::size_t level, linalg::DenseMatrix coarse,
                                              linalg::DenseMatrix fine,
                                              std::vector<std::size_t> selected,
                                              std::vector<rng::InputSample> inputs,
                                              double id_residual) {
  if (coarse.cols() != fine.cols() || coarse.cols() == 0) {
    throw DimensionError("reduced basis: coarse and fine bases must have the same r >= 1 columns");
  }
  if (selected.size() != static_cast<std::size_t>(coarse.cols()) || inputs.size() != selected.size()) {
    throw DimensionError("reduced basis: one selected input per basis column");
  }
  ReducedBasisPair b;
  b.level = level;
  b.rank = static_cast<std::size_t>(coarse.cols());
  b.solver = std::make_shared<const linalg::LeastSquaresSolver>(coarse);
  b.coarse_basis = std::move(coarse);
  b.fine_basis = std::move(fine);
  b.selected = std::move(selected);
  b.selected_inputs = std::move(inputs);
  b.id_residual = id_residual;
  return b;
}

Eigen::VectorXd ReducedBasisPair::reconstruct(const Eigen::VectorXd& q_coarse) const {
  if (!solver) throw ConfigError("reduced basis has no factorization");
  return fine_basis * solver->solve(q_coarse);
}

double ReducedBasisPair::sample_Z(const models::LevelHierarchy& h, const Eigen::VectorXd& q_coarse) const {
  if (q_coarse.size() != coarse_basis.rows()) {
    throw DimensionError("sample_Z: coarse vector has length " + std::to_string(q_coarse.size()) +
                         ", basis expects " + std::to_string(coarse_basis.rows()));
  }
  return h.qoi(level, reconstruct(q_coarse)) - h.qoi(level - 1, q_coarse);
}

linalg::DenseMatrix coarse_data_matrix(const mlmc::LevelSamples& pilot) {
  if (pilot.coarse_q.empty()) throw ConfigError("level has no coarse samples");
  const auto m = pilot.coarse_q.front().size();
  linalg::DenseMatrix u(m, static_cast<Eigen::Index>(pilot.coarse_q.size()));
  for (std::size_t i = 0; i < pilot.coarse_q.size(); ++i) {
    u.col(static_cast<Eigen::Index>(i)) = pilot.coarse_q[i];
  }
  return u;
}

std::optional<ReducedBasisPair> build_reduced_basis(const models::LevelHierarchy& h,
                                                    std::size_t level,
                                                    const mlmc::LevelSamples& pilot,
                                                    const linalg::Termination& termination) {
  if (level < 1 || level >= h.num_levels()) throw DimensionError("basis level out of range");
  if (termination.mode == linalg::Termination::Mode::fixed_rank &&
      pilot.size() < termination.rank) {
    throw ConfigError("level " + std::to_string(level) + ": pilot size " +
                      std::to_string(pilot.size()) + " is smaller than the rank " +
                      std::to_string(termination.rank));
  }
  const linalg::DenseMatrix u = coarse_data_matrix(pilot);
  linalg::IDFactorization id;
  try {
    id = linalg::interpolative_decomposition(u, termination);
  } catch (const linalg::EmptyRankError&) {
    return std::nullopt;
  }
  const auto r = static_cast<Eigen::Index>(id.rank);
  linalg::DenseMatrix fine(static_cast<Eigen::Index>(h.output_dim(level)), r);
  std::vector<rng::InputSample> inputs;
  for (Eigen::Index k = 0; k < r; ++k) {
    const auto& xi = pilot.inputs.at(id.selected_indices[static_cast<std::size_t>(k)]);
    fine.col(k) = h.evaluate(level, xi).q;
    inputs.push_back(xi);
  }
  return ReducedBasisPair::from_parts(level, linalg::select_columns(u, id.selected_indices),
                                      std::move(fine), id.selected_indices, std::move(inputs),
                                      id.residual_norm);
}

ZbarRule allocate_zbar(double rho2, double zeta, double s2) {
  if (!(rho2 >= 0.0 && rho2 <= 1.0)) throw DataError("allocate_zbar: rho2 outside [0, 1]");
  if (!(zeta > 0.0)) throw DataError("allocate_zbar: zeta must be positive");
  if (!(s2 > 1.0)) throw ConfigError("s2 must be greater than 1");
  ZbarRule z;
  z.s1 = rho2 >= 1.0 ? std::numeric_limits<double>::infinity()
                     : std::sqrt(rho2 / (zeta * (1.0 - rho2)));
  z.multiplier = std::min(s2, std::max(0.0, z.s1 - 1.0));
  z.enabled = z.multiplier > 0.0;
  return z;
}

double theta_star(double cov_yz, double var_z, double ratio) {
  if (!(var_z > 0.0)) return 0.0;
  return (cov_yz / var_z) / (1.0 + ratio);
}

double zeta(const mlmc::LevelStats& s) { return s.coarse_cost / s.cost(); }

namespace {

std::vector<bool> basis_mask(const ReducedBasisPair& b, std::size_t n) {
  std::vector<bool> mask(n, false);
  for (std::size_t i : b.selected) {
    if (i >= n) throw DimensionError("basis refers to a pilot sample that does not exist");
    mask[i] = true;
  }
  return mask;
}

}  // namespace

CVLevelConfig analyze_level(const models::LevelHierarchy& h, const ReducedBasisPair& basis,
                            const mlmc::LevelSamples& pilot, double zeta_l, double s2,
                            unsigned threads) {
  CVLevelConfig cv;
  cv.level = basis.level;
  cv.has_basis = true;
  cv.rank = basis.rank;
  cv.zeta = zeta_l;
  const auto mask = basis_mask(basis, pilot.size());
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pilot.size(); ++i) {
    if (!mask[i]) idx.push_back(i);
  }
  cv.n_samples = idx.size();
  if (idx.size() < mlmc::kMinSamples) {
    cv.rule = {};
    return cv;
  }
  std::vector<double> y(idx.size()), z(idx.size());
  parallel_for(idx.size(), threads, [&](std::size_t k) {
    y[k] = pilot.y(idx[k]);
    z[k] = basis.sample_Z(h, pilot.coarse_q[idx[k]]);
  });
  const stats::Moments m = stats::accumulate(y, z);
  cv.mean_y = m.mean_y();
  cv.var_y = m.var_y();
  cv.mean_z = m.mean_z();
  cv.var_z = m.var_z();
  cv.cov_yz = m.cov_yz();
  const stats::RhoSquared r = stats::rho_squared(cv.var_y, cv.var_z, cv.cov_yz);
  cv.rho2 = r.value;
  cv.degenerate = r.degenerate;
  cv.rule = cv.degenerate ? ZbarRule{} : allocate_zbar(cv.rho2, zeta_l, s2);
  return cv;
}

MlcvPilot assemble_mlcv(const models::LevelHierarchy& h, mlmc::PilotResult pilot,
                        std::vector<std::optional<ReducedBasisPair>> bases, double s2,
                        unsigned threads) {
  const std::size_t levels = h.num_levels();
  if (pilot.samples.size() != levels) throw ConfigError("pilot data does not match the hierarchy");
  if (bases.size() != levels) throw ConfigError("need one basis slot per level");
  if (!(s2 > 1.0)) throw ConfigError("s2 must be greater than 1");
  MlcvPilot out;
  out.s2 = s2;
  out.cv.resize(levels);
  for (std::size_t l = 0; l < levels; ++l) {
    out.cv[l].level = l;
    if (l == 0) {
      if (bases[0]) throw ConfigError("level 0 takes no basis");
      continue;
    }
    if (bases[l]) {
      if (bases[l]->level != l) throw ConfigError("basis stored for the wrong level");
      out.cv[l] = analyze_level(h, *bases[l], pilot.samples[l], zeta(pilot.stats[l]), s2, threads);
    }
  }
  out.pilot = std::move(pilot);
  out.bases = std::move(bases);
  return out;
}

MlcvPilot prepare_mlcv(const models::LevelHierarchy& h, mlmc::PilotResult pilot,
                       std::span<const linalg::Termination> terminations, double s2,
                       unsigned threads) {
  const std::size_t levels = h.num_levels();
  if (terminations.size() + 1 != levels) {
    throw ConfigError("need one rank policy per level l >= 1");
  }
  std::vector<std::optional<ReducedBasisPair>> bases(levels);
  for (std::size_t l = 1; l < levels; ++l) {
    bases[l] = build_reduced_basis(h, l, pilot.samples.at(l), terminations[l - 1]);
  }
  return assemble_mlcv(h, std::move(pilot), std::move(bases), s2, threads);
}

double MlcvPlan::cost() const {
  const auto& n = tilde.n;
  double c = static_cast<double>(n[0]) * unit_costs[0];
  for (std::size_t l = 1; l < n.size(); ++l) {
    c += static_cast<double>(n[l] + rank[l]) * (unit_costs[l - 1] + unit_costs[l]);
  }
  for (std::size_t l = 1; l < n.size(); ++l) c += static_cast<double>(n_prime[l]) * unit_costs[l - 1];
  return c;
}

mlmc::AllocationPlan allocate_mlcv(std::span<const double> variances, std::span<const double> costs,
                                   std::span<const double> rho2, std::span<const double> ratios,
                                   double epsilon) {
  if (rho2.size() != variances.size() || ratios.size() != variances.size()) {
    throw DimensionError("allocate_mlcv: need rho2 and ratio per level");
  }
  std::vector<double> eff(variances.size());
  for (std::size_t l = 0; l < variances.size(); ++l) {
    eff[l] = variances[l] * stats::mse_reduction_factor(rho2[l], ratios[l]);
  }
  return mlmc::allocate_mlmc(eff, costs, epsilon);
}

MlcvPlan plan_mlcv(const MlcvPilot& p, double epsilon, bool force_disable) {
  const std::size_t levels = p.pilot.stats.size();
  MlcvPlan plan;
  plan.rho2.assign(levels, 0.0);
  plan.multiplier.assign(levels, 0.0);
  plan.ratio.assign(levels, 0.0);
  plan.n_prime.assign(levels, 0);
  plan.rank.assign(levels, 0);
  std::vector<double> costs(levels);
  for (std::size_t l = 0; l < levels; ++l) {
    const auto& st = p.pilot.stats[l];
    plan.unit_costs.push_back(st.unit_cost);
    plan.variances.push_back(st.var_y);
    costs[l] = st.cost();
    if (l == 0) continue;
    const CVLevelConfig& cv = p.cv[l];
    plan.rank[l] = cv.has_basis ? cv.rank : 0;
    if (!force_disable && cv.enabled()) {
      plan.rho2[l] = cv.rho2;
      plan.multiplier[l] = cv.rule.multiplier;
      plan.ratio[l] = 1.0 / cv.rule.multiplier;
    }
  }
  plan.tilde = allocate_mlcv(plan.variances, costs, plan.rho2, plan.ratio, epsilon);
  for (std::size_t l = 1; l < levels; ++l) {
    if (plan.multiplier[l] > 0.0) {
      plan.n_prime[l] = std::max<std::size_t>(
          1, mlmc::guarded_ceil(plan.multiplier[l] * static_cast<double>(plan.tilde.n[l])));
    }
  }
  return plan;
}

ZbarEstimate estimate_zbar(const models::LevelHierarchy& h, const ReducedBasisPair& basis,
                           std::size_t n_prime, std::uint64_t seed, unsigned threads) {
  if (n_prime < 1) throw ConfigError("estimate_zbar: N' must be >= 1");
  const std::size_t l = basis.level;
  std::vector<double> z(n_prime);
  parallel_for(n_prime, threads, [&](std::size_t i) {
    const auto xi = mlmc::draw(h, seed, rng::Purpose::zbar(static_cast<std::uint32_t>(l)), i);
    const models::LevelOutput coarse = h.evaluate(l - 1, xi);
    z[i] = basis.sample_Z(h, coarse.q);
  });
  ZbarEstimate e;
  e.mean = stats::mc_mean(z);
  e.n = n_prime;
  e.cost = static_cast<double>(n_prime) * h.unit_cost(l - 1);
  return e;
}

mlmc::EstimatorResult run_mlcv(const models::LevelHierarchy& h, const MlcvPilot& p,
                               const MlcvPlan& plan, std::uint64_t seed,
                               const MlcvRunOptions& options) {
  const std::size_t levels = h.num_levels();
  const mlmc::PilotResult& pilot = p.pilot;
  if (pilot.samples.size() != levels || plan.tilde.n.size() != levels) {
    throw ConfigError("pilot or plan does not match the hierarchy");
  }
  mlmc::EstimatorResult res;
  res.method = mlmc::Method::mlcv;
  res.epsilon = plan.epsilon();
  res.seed = seed;
  res.pilot_cost = pilot.cost();
  if (plan.tilde.all_zero_variance) res.warnings.push_back("all level variances are zero; N_min used everywhere");

  for (std::size_t l = 0; l < levels; ++l) {
    const mlmc::LevelSamples& s = pilot.samples[l];
    const mlmc::LevelStats& st = pilot.stats[l];
    mlmc::LevelRun lr;
    lr.level = l;
    lr.planned = plan.tilde.n[l];
    lr.unit_cost = st.unit_cost;
    lr.coarse_cost = st.coarse_cost;
    lr.var_y = plan.variances[l];
    const bool enabled = l > 0 && plan.multiplier[l] > 0.0;
    if (l > 0 && p.bases[l] && p.bases[l]->rank != plan.rank[l]) {
      throw ConfigError("plan rank does not match the basis of level " + std::to_string(l));
    }
    if (enabled && !p.bases[l]) {
      throw ConfigError("level " + std::to_string(l) + " is enabled but has no basis");
    }
    lr.n_basis = l > 0 ? plan.rank[l] : 0;

    if (!enabled) {
      // W_l = Y_l: all pilot pairs are recycled, exactly as in the MLMC run.
      std::vector<double> y = s.y_values();
      const std::size_t target = std::max(lr.planned, s.size());
      std::vector<double> extra(target - s.size());
      parallel_for(extra.size(), options.threads, [&](std::size_t i) {
        const auto xi = mlmc::draw(h, seed, rng::Purpose::main_y(static_cast<std::uint32_t>(l)), i);
        extra[i] = l == 0 ? h.evaluate(0, xi).value : models::evaluate_coupled(h, l, xi).y();
      });
      y.insert(y.end(), extra.begin(), extra.end());
      lr.n_used = y.size();
      lr.n_recycled = s.size();
      lr.n_new = extra.size();
      lr.mean_y = stats::mc_mean(y);
      lr.partial = lr.mean_y;
      lr.mserf = 1.0;
    } else {
      const ReducedBasisPair& basis = *p.bases[l];
      const auto mask = basis_mask(basis, s.size());
      std::vector<std::size_t> recycled;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (!mask[i]) recycled.push_back(i);
      }
      const std::size_t target = std::max(lr.planned, recycled.size());
      const std::size_t fresh = target - recycled.size();
      std::vector<double> y(target), z(target);
      parallel_for(target, options.threads, [&](std::size_t k) {
        if (k < recycled.size()) {
          y[k] = s.y(recycled[k]);
          z[k] = basis.sample_Z(h, s.coarse_q[recycled[k]]);
        } else {
          const auto xi = mlmc::draw(h, seed, rng::Purpose::main_y(static_cast<std::uint32_t>(l)),
                                     k - recycled.size());
          const models::CoupledOutput c = models::evaluate_coupled(h, l, xi);
          y[k] = c.y();
          z[k] = basis.sample_Z(h, c.coarse.q);
        }
      });
      lr.n_used = target;
      lr.n_recycled = recycled.size();
      lr.n_new = fresh;
      lr.cv_enabled = true;
      lr.multiplier = plan.multiplier[l];
      lr.rho2 = plan.rho2[l];
      lr.n_prime = std::max<std::size_t>(
          1, mlmc::guarded_ceil(lr.multiplier * static_cast<double>(lr.n_used)));
      lr.ratio = static_cast<double>(lr.n_used) / static_cast<double>(lr.n_prime);
      lr.mserf = stats::mse_reduction_factor(lr.rho2, lr.ratio);
      const CVLevelConfig& cv = p.cv[l];
      lr.theta = theta_star(cv.cov_yz, cv.var_z, lr.ratio);
      const ZbarEstimate zb = estimate_zbar(h, basis, lr.n_prime, seed, options.threads);
      lr.zbar = zb.mean;
      lr.zbar_cost = static_cast<double>(lr.n_prime) * lr.coarse_cost;
      std::vector<double> w(target);
      for (std::size_t k = 0; k < target; ++k) w[k] = y[k] - lr.theta * (z[k] - lr.zbar);
      lr.mean_y = stats::mc_mean(y);
      lr.mean_z = stats::mc_mean(z);
      lr.partial = stats::mc_mean(w);
      lr.below_rank = lr.planned < basis.rank;
      if (lr.below_rank) {
        res.warnings.push_back("level " + std::to_string(l) + ": N~ = " + std::to_string(lr.planned) +
                               " is below the basis rank " + std::to_string(basis.rank) +
                               "; basis cost dominates");
      }
    }
    const double pair_cost = lr.unit_cost + lr.coarse_cost;
    lr.cost = static_cast<double>(lr.n_used + lr.n_basis) * pair_cost +
              static_cast<double>(lr.n_prime) * lr.coarse_cost;
    res.sampling_error += lr.var_y / static_cast<double>(lr.n_used) * lr.mserf;
    res.levels.push_back(lr);
  }
  res.cost = logged_cost(res);
  for (const auto& lr : res.levels) res.estimate += lr.partial;
  return res;
}

double logged_cost(const mlmc::EstimatorResult& r) {
  if (r.levels.empty()) return 0.0;
  const auto& l0 = r.levels.front();
  double c = static_cast<double>(l0.n_used + l0.n_basis) * (l0.unit_cost + l0.coarse_cost);
  for (std::size_t l = 1; l < r.levels.size(); ++l) {
    const auto& lr = r.levels[l];
    c += static_cast<double>(lr.n_used + lr.n_basis) * (lr.unit_cost + lr.coarse_cost);
  }
  for (std::size_t l = 1; l < r.levels.size(); ++l) {
    const auto& lr = r.levels[l];
    c += static_cast<double>(lr.n_prime) * lr.coarse_cost;
  }
  return c;
}

std::vector<double> relative_error_curves(std::span<const double> partials, double reference) {
  if (!(reference != 0.0) || !std::isfinite(reference)) {
    throw DataError("relative_error_curves: reference must be finite and nonzero");
  }
  std::vector<double> out(partials.size());
  double acc = 0.0;
  for (std::size_t l = 0; l < partials.size(); ++l) {
    acc += partials[l];
    out[l] = std::abs(acc - reference) / std::abs(reference);
  }
  return out;
}

}  // namespace lrcv::mlcv
