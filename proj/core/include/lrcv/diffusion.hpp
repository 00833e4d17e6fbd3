#pragma once

#include <cstddef>
#include <vector>

#include "lrcv/kl.hpp"
#include "lrcv/models.hpp"

namespace lrcv::models {

enum class DiffusionQoi { integral_of_u, flux_at_left };

struct DiffusionParams {
  Kernel kernel = Kernel::squared_exponential(0.3, 0.3);
  std::size_t kl_modes = 10;  // d
  std::size_t kl_grid = 257;  // Nystrom points
  double abar = 0.1;
  /// a = abar + exp(field_scale * G). abar = 0 with field_scale = 0 gives a = 1.
  double field_scale = 1.0;
  rng::Distribution input = rng::Distribution::standard_gaussian();
  std::size_t base_cells = 16;
  std::size_t refinement = 2;
  std::size_t levels = 4;
  DiffusionQoi qoi = DiffusionQoi::integral_of_u;
  double cost_exponent = 1.0;
};

/// -(a u')' = 1 on (0, 1), u(0) = u(1) = 0, with a = abar + exp(G) and G a KL
/// field. Second-order finite differences on nested grids of n_l = n_0 s^l cells,
/// coefficient taken at cell midpoints, tridiagonal (Thomas) solve. q_l holds the
/// M_l = n_l - 1 interior nodal values.
///
/// QoIs: the trapezoid integral h sum u_j, or the boundary flux -u'(0) from the
/// one-sided difference -(4 u_1 - u_2) / (2h). The flux omits a(0) so that Q
/// stays a function of q alone.
class Diffusion1D final : public LevelHierarchy {
 public:
  explicit Diffusion1D(const DiffusionParams& params);

  std::string name() const override { return "diffusion_1d"; }
  std::size_t num_levels() const override { return p_.levels; }
  std::size_t dof(std::size_t level) const override;
  std::size_t output_dim(std::size_t level) const override { return dof(level); }
  double unit_cost(std::size_t level) const override;
  const std::vector<rng::Distribution>& inputs() const override { return inputs_; }
  LevelOutput evaluate(std::size_t level, const rng::InputSample& xi) const override;
  double qoi(std::size_t level, const Eigen::VectorXd& q) const override;
  std::string fingerprint() const override;

  const DiffusionParams& params() const { return p_; }
  const KLField& field() const { return field_; }
  std::size_t cells(std::size_t level) const;
  /// Coefficient a at the cell midpoints of the level.
  Eigen::VectorXd coefficient(std::size_t level, const rng::InputSample& xi) const;

 private:
  DiffusionParams p_;
  std::vector<rng::Distribution> inputs_;
  KLField field_;
  std::vector<Eigen::MatrixXd> midpoint_modes_;  // n_l x d
};

/// Solves the tridiagonal system with sub-diagonal `lower` (length n-1), diagonal
/// `diag` (n) and super-diagonal `upper` (n-1). Throws NumericalError on a zero
/// or non-finite pivot.
Eigen::VectorXd solve_tridiagonal(const Eigen::VectorXd& lower, const Eigen::VectorXd& diag,
                                  const Eigen::VectorXd& upper, const Eigen::VectorXd& rhs);

}  // namespace lrcv::models
