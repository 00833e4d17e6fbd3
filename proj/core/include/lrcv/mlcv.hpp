#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "lrcv/linalg.hpp"
#include "lrcv/mlmc.hpp"

namespace lrcv::mlcv {

inline constexpr double kDefaultS2 = 10.0;

/// Coarse skeleton U^c_{l-1} and its fine counterpart U^c_l, evaluated at the same
/// r pilot inputs, with the least-squares factorization of U^c_{l-1} cached.
struct ReducedBasisPair {
  std::size_t level = 0;
  std::size_t rank = 0;
  linalg::DenseMatrix coarse_basis;  // m_{l-1} x r
  linalg::DenseMatrix fine_basis;    // m_l x r
  std::vector<std::size_t> selected;  // pilot sample indices
  std::vector<rng::InputSample> selected_inputs;
  double id_residual = 0.0;  // ||U_{l-1} - U^c C||_2 on the pilot data matrix
  std::shared_ptr<const linalg::LeastSquaresSolver> solver;

  /// Builds the pair from stored parts (used when loading a cached basis).
  static ReducedBasisPair from_parts(std::size_t level, linalg::DenseMatrix coarse,
                                     linalg::DenseMatrix fine, std::vector<std::size_t> selected,
                                     std::vector<rng::InputSample> inputs, double id_residual);

  /// Z_l = Q(U^c_l c) - Q(q_{l-1}) with c = argmin ||U^c_{l-1} c - q_{l-1}||.
  double sample_Z(const models::LevelHierarchy& h, const Eigen::VectorXd& q_coarse) const;
  /// q^ID_l = U^c_l c.
  Eigen::VectorXd reconstruct(const Eigen::VectorXd& q_coarse) const;
};

/// Runs the ID on the pilot's coarse data matrix [q_{l-1}^(1) ... q_{l-1}^(N_p)]
/// and evaluates level l at the selected inputs. Returns nullopt when the
/// tolerance admits rank 0 (CV disabled on that level). Throws ConfigError when
/// N_p < r.
std::optional<ReducedBasisPair> build_reduced_basis(const models::LevelHierarchy& h,
                                                    std::size_t level,
                                                    const mlmc::LevelSamples& pilot,
                                                    const linalg::Termination& termination);

/// The coarse data matrix of a pilot level (m_{l-1} x N_p).
linalg::DenseMatrix coarse_data_matrix(const mlmc::LevelSamples& pilot);

struct ZbarRule {
  double s1 = 0.0;
  double multiplier = 0.0;  // N'_l = ceil(multiplier * N~_l)
  bool enabled = false;
};

/// s1 = sqrt(rho2 / (zeta (1 - rho2))), multiplier = min(s2, max(0, s1 - 1)).
ZbarRule allocate_zbar(double rho2, double zeta, double s2 = kDefaultS2);

/// (cov / var_z) / (1 + ratio); 0 when var_z <= 0.
double theta_star(double cov_yz, double var_z, double ratio);

/// Pilot-estimated control-variate quantities of one level.
struct CVLevelConfig {
  std::size_t level = 0;
  bool has_basis = false;
  std::size_t rank = 0;
  std::size_t n_samples = 0;  // non-basis pilot pairs used for the moments
  double mean_y = 0.0;
  double var_y = 0.0;
  double mean_z = 0.0;
  double var_z = 0.0;
  double cov_yz = 0.0;
  double rho2 = 0.0;
  bool degenerate = true;
  double zeta = 0.0;
  ZbarRule rule;
  bool enabled() const { return rule.enabled; }
};

/// Moments of (Y_l, Z_l) over the pilot pairs that are not basis members.
CVLevelConfig analyze_level(const models::LevelHierarchy& h, const ReducedBasisPair& basis,
                            const mlmc::LevelSamples& pilot, double zeta, double s2,
                            unsigned threads = 1);

struct MlcvPilot {
  mlmc::PilotResult pilot;
  std::vector<std::optional<ReducedBasisPair>> bases;  // index l; empty at l = 0
  std::vector<CVLevelConfig> cv;                      // index l
  double s2 = kDefaultS2;
};

/// zeta_l = C(Q_{l-1}) / (C(Q_l) + C(Q_{l-1})).
double zeta(const mlmc::LevelStats& s);

/// Builds bases (one termination per level l >= 1) and the CV configuration.
MlcvPilot prepare_mlcv(const models::LevelHierarchy& h, mlmc::PilotResult pilot,
                       std::span<const linalg::Termination> terminations, double s2 = kDefaultS2,
                       unsigned threads = 1);

/// Same, with bases supplied by the caller (e.g. loaded from a cache).
MlcvPilot assemble_mlcv(const models::LevelHierarchy& h, mlmc::PilotResult pilot,
                        std::vector<std::optional<ReducedBasisPair>> bases, double s2 = kDefaultS2,
                        unsigned threads = 1);

struct MlcvPlan {
  mlmc::AllocationPlan tilde;        // N~_l, built from the effective variances
  std::vector<double> rho2;          // 0 on disabled levels
  std::vector<double> multiplier;    // 0 on disabled levels
  std::vector<double> ratio;         // N~/N' = 1 / multiplier, 0 on disabled levels
  std::vector<std::size_t> n_prime;  // ceil(multiplier N~)
  std::vector<std::size_t> rank;     // basis size charged per level
  std::vector<double> unit_costs;    // C(Q_l)
  std::vector<double> variances;     // V[Y_l] before the reduction factor

  double epsilon() const { return tilde.epsilon; }
  /// N~_0 C(Q_0) + sum (N~_l + r)(C(Q_{l-1}) + C(Q_l)) + sum N'_l C(Q_{l-1}).
  double cost() const;
};

/// N~_l from the effective variances V_l (1 - rho2_l / (1 + ratio_l)).
mlmc::AllocationPlan allocate_mlcv(std::span<const double> variances, std::span<const double> costs,
                                   std::span<const double> rho2, std::span<const double> ratios,
                                   double epsilon);

/// Full plan from a prepared pilot. force_disable sets rho2 = 0 on every level.
MlcvPlan plan_mlcv(const MlcvPilot& p, double epsilon, bool force_disable = false);

struct ZbarEstimate {
  double mean = 0.0;
  std::size_t n = 0;
  double cost = 0.0;  // n C(Q_{l-1})
};

/// Mean of N' fresh Z_l samples from the zbar(l) stream (coarse evaluations only).
ZbarEstimate estimate_zbar(const models::LevelHierarchy& h, const ReducedBasisPair& basis,
                           std::size_t n_prime, std::uint64_t seed, unsigned threads = 1);

struct MlcvRunOptions {
  unsigned threads = 1;
};

/// Main run. Enabled levels recycle the N_p - r non-basis pilot pairs and use
/// max(N~_l, N_p - r) pairs; disabled levels behave as MLMC. Cost follows the
/// MLCV cost formula with the logged counts.
mlmc::EstimatorResult run_mlcv(const models::LevelHierarchy& h, const MlcvPilot& p,
                               const MlcvPlan& plan, std::uint64_t seed,
                               const MlcvRunOptions& options = {});

/// Cost recomputed from the logged counts of a result.
double logged_cost(const mlmc::EstimatorResult& r);

/// |sum_{k<=l} partial_k - reference| / |reference| for each l.
std::vector<double> relative_error_curves(std::span<const double> partials, double reference);

}  // namespace lrcv::mlcv
