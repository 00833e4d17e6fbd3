#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrcv/models.hpp"
#include "lrcv/rng.hpp"

namespace lrcv::mlmc {

inline constexpr std::size_t kMinSamples = 2;

struct SampleOptions {
  unsigned threads = 1;       // 0 = hardware concurrency
  bool measure_cost = false;  // pilot: time level evaluations instead of using declared costs
};

/// Draws sample `index` of the stream (seed, purpose) for the hierarchy's inputs.
rng::InputSample draw(const models::LevelHierarchy& h, std::uint64_t seed, rng::Purpose purpose,
                      std::uint64_t index);

/// Pilot samples of one level, kept for recycling and basis construction.
struct LevelSamples {
  std::size_t level = 0;
  std::vector<rng::InputSample> inputs;
  std::vector<double> fine;    // Q_l
  std::vector<double> coarse;  // Q_{l-1}; empty at level 0
  std::vector<Eigen::VectorXd> coarse_q;  // q_{l-1}; empty at level 0

  std::size_t size() const { return fine.size(); }
  double y(std::size_t i) const { return coarse.empty() ? fine[i] : fine[i] - coarse[i]; }
  std::vector<double> y_values() const;
};

struct LevelStats {
  std::size_t level = 0;
  std::size_t n_samples = 0;
  std::size_t dof = 0;         // M_l
  std::size_t output_dim = 0;  // m_l
  double mean_y = 0.0;
  double var_y = 0.0;
  double mean_q = 0.0;
  double var_q = 0.0;
  double unit_cost = 0.0;    // C(Q_l)
  double coarse_cost = 0.0;  // C(Q_{l-1}), 0 at level 0
  double cost() const { return unit_cost + coarse_cost; }  // cost of one Y_l sample
};

struct PilotResult {
  std::uint64_t seed = 0;
  std::size_t n_pilot = 0;
  std::vector<LevelStats> stats;
  std::vector<LevelSamples> samples;
  /// Mean wall time per evaluation when measured, else the declared costs.
  std::vector<double> unit_costs;
  bool measured = false;

  double cost() const;  // sum_l N_p C_l
};

/// N_p coupled samples per level from the pilot(l) streams.
PilotResult pilot_mlmc(const models::LevelHierarchy& h, std::size_t n_pilot, std::uint64_t seed,
                       const SampleOptions& options = {});

/// Statistics of cached samples (used to rebuild stats from a stored pilot).
LevelStats level_stats(const LevelSamples& s, std::size_t dof, std::size_t output_dim,
                       double unit_cost, double coarse_cost);

struct RateFit {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  std::vector<std::size_t> alpha_levels;
  std::vector<std::size_t> beta_levels;
  std::vector<std::size_t> gamma_levels;
  double alpha_residual = 0.0;  // RMS residual of the log-log fit
  double beta_residual = 0.0;
  double gamma_residual = 0.0;
};

/// Least-squares slope of log(y) on log(x); returns {slope, intercept, rms residual}.
struct LogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
};
LogFit fit_loglog(std::span<const double> x, std::span<const double> y);

/// alpha from |mean Y_l| and beta from V[Y_l] over levels l >= 1 with positive
/// values, gamma from C(Q_l) over all levels. Slopes are negated for alpha and beta.
RateFit fit_rates(std::span<const LevelStats> stats);

struct AllocationPlan {
  double epsilon = 0.0;
  std::vector<std::size_t> n;
  std::vector<double> variances;  // the variances the plan was built from
  std::vector<double> costs;
  bool all_zero_variance = false;

  double cost() const;
  double sampling_error() const;  // sum V / N
};

/// N_l = ceil((2/eps^2) sum_k sqrt(V_k C_k) sqrt(V_l / C_l)), floored at N_min.
AllocationPlan allocate_mlmc(std::span<const double> variances, std::span<const double> costs,
                             double epsilon);
AllocationPlan allocate_mlmc(std::span<const LevelStats> stats, double epsilon);

enum class Method { mc, mlmc, mlcv };
std::string method_name(Method m);
Method parse_method(const std::string& name);

struct LevelRun {
  std::size_t level = 0;
  std::size_t planned = 0;     // N_l or N~_l from the plan
  std::size_t n_used = 0;      // samples entering the level estimator
  std::size_t n_recycled = 0;  // of which taken from the pilot
  std::size_t n_new = 0;       // of which freshly evaluated
  double mean_y = 0.0;
  double var_y = 0.0;  // variance used for the error report
  double partial = 0.0;  // Y-hat_l, or W-hat_l for MLCV
  double unit_cost = 0.0;
  double coarse_cost = 0.0;
  double cost = 0.0;  // cost charged to this level

  // Control-variate fields (MLCV only).
  bool cv_enabled = false;
  std::size_t n_basis = 0;
  std::size_t n_prime = 0;
  double rho2 = 0.0;
  double ratio = 0.0;
  double mserf = 1.0;
  double theta = 0.0;
  double zbar = 0.0;
  double zbar_cost = 0.0;
  double mean_z = 0.0;
  double multiplier = 0.0;
  bool below_rank = false;  // N~_l < r
};

struct EstimatorResult {
  Method method = Method::mlmc;
  double epsilon = 0.0;
  double estimate = 0.0;
  double sampling_error = 0.0;
  double cost = 0.0;
  double pilot_cost = 0.0;
  std::uint64_t seed = 0;
  std::vector<LevelRun> levels;
  std::vector<std::string> warnings;
};

struct RunOptions {
  unsigned threads = 1;
  bool update_variances = false;
};

/// Telescoping estimator. Level l uses max(N_l, N_p) samples: the cached pilot
/// samples first, then fresh ones from main_y(l). Cost is sum n_used C_l.
EstimatorResult run_mlmc(const models::LevelHierarchy& h, const AllocationPlan& plan,
                         std::uint64_t seed, const PilotResult& pilot, const RunOptions& options = {});

/// Plain MC on the finest level: N = max(2, ceil(2 V[Q_L] / eps^2)), pilot Q_L first.
EstimatorResult run_mc(const models::LevelHierarchy& h, double epsilon, std::uint64_t seed,
                       const PilotResult& pilot, const RunOptions& options = {});

struct McReference {
  std::size_t n = 0;
  double cost = 0.0;
};
/// N = ceil(2 V / eps^2), cost = N C(Q_L). Throws on zero variance.
McReference mc_cost_reference(double var_q, double unit_cost, double epsilon);
McReference mc_cost_reference(const LevelStats& finest, double epsilon);

struct BiasCheck {
  bool available = false;
  double estimate = 0.0;  // |mean Y_L| / (s^alpha - 1)
  double limit = 0.0;     // eps / sqrt(2)
  bool violated = false;
};
BiasCheck check_bias(std::span<const LevelStats> stats, const RateFit& fit, double epsilon);

/// ceil(x) that ignores relative round-off of 1e-12 above an integer.
std::size_t guarded_ceil(double x);

}  // namespace lrcv::mlmc
