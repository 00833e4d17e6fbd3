#pragma once

#include <cstddef>
#include <vector>

#include "lrcv/models.hpp"

namespace lrcv::models {

struct SyntheticParams {
  std::size_t rank = 5;         // r_true
  std::size_t input_dim = 8;    // d
  std::size_t m0 = 16;          // m_0
  std::size_t refinement = 2;   // s
  std::size_t levels = 3;       // L + 1
  double delta = 1e-3;          // size of the level-dependent perturbation
  double cost_exponent = 1.0;   // gamma in C(Q_l) = M_l^gamma
};

/// Exactly low-rank hierarchy on the left-endpoint grid x_i = i / m_l, m_l = m_0 s^l:
///
///   q_l(x_i) = sum_k cos((k+1) pi x_i) g_k(xi) + delta s^-l sin(2 pi x_i (1 + xi_0^2) + xi_1),
///   g_k(xi)  = exp((0.4 + 0.1 k) xi_k) (1 + 0.5 xi_{k+1} xi_{k+2})   (indices mod d),
///
/// with xi uniform on [-1, 1]^d and Q = mean(q). Levels differ through the
/// rectangle-rule error of the profiles, so E[Y_l] and V[Y_l] decay geometrically.
class SyntheticLowRank final : public LevelHierarchy {
 public:
  explicit SyntheticLowRank(const SyntheticParams& params);

  std::string name() const override { return "synthetic_low_rank"; }
  std::size_t num_levels() const override { return p_.levels; }
  std::size_t dof(std::size_t level) const override;
  std::size_t output_dim(std::size_t level) const override { return dof(level); }
  double unit_cost(std::size_t level) const override;
  const std::vector<rng::Distribution>& inputs() const override { return inputs_; }
  LevelOutput evaluate(std::size_t level, const rng::InputSample& xi) const override;
  double qoi(std::size_t level, const Eigen::VectorXd& q) const override;
  std::string fingerprint() const override;

  const SyntheticParams& params() const { return p_; }
  /// The nonlinear coefficient map g(xi) of length r_true.
  Eigen::VectorXd coefficients(const rng::InputSample& xi) const;
  /// The fixed m_l x r_true profile matrix A_l.
  const Eigen::MatrixXd& profile(std::size_t level) const;

 private:
  SyntheticParams p_;
  std::vector<rng::Distribution> inputs_;
  std::vector<Eigen::MatrixXd> profiles_;
};

}  // namespace lrcv::models
