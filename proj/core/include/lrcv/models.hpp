#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrcv/rng.hpp"

namespace lrcv::models {

/// Solution-dependent vector q_l and the scalar QoI Q_l = Q(q_l).
struct LevelOutput {
  Eigen::VectorXd q;
  double value = 0.0;
};

/// A hierarchy of discretizations l = 0..L. Implementations are immutable after
/// construction and evaluate() must be reentrant.
class LevelHierarchy {
 public:
  virtual ~LevelHierarchy() = default;

  virtual std::string name() const = 0;
  /// L + 1.
  virtual std::size_t num_levels() const = 0;
  /// Degrees of freedom M_l, strictly increasing in l.
  virtual std::size_t dof(std::size_t level) const = 0;
  /// Length m_l of q_l.
  virtual std::size_t output_dim(std::size_t level) const = 0;
  /// Cost C(Q_l) of one level-l evaluation.
  virtual double unit_cost(std::size_t level) const = 0;
  virtual const std::vector<rng::Distribution>& inputs() const = 0;
  virtual LevelOutput evaluate(std::size_t level, const rng::InputSample& xi) const = 0;
  /// The QoI map; Q_l depends on xi only through q_l.
  virtual double qoi(std::size_t level, const Eigen::VectorXd& q) const = 0;
  /// Canonical parameter string. Equal fingerprints mean equal models.
  virtual std::string fingerprint() const = 0;

  std::size_t finest_level() const { return num_levels() - 1; }
  std::size_t input_dim() const { return inputs().size(); }
};

/// Cost of one Y_l sample: C(Q_l) + C(Q_{l-1}), or C(Q_0) at level 0.
double coupled_cost(const LevelHierarchy& h, std::size_t level);

struct CoupledOutput {
  LevelOutput fine;
  LevelOutput coarse;
  double cost = 0.0;
  double y() const { return fine.value - coarse.value; }
};

/// Evaluates levels l and l-1 at the same xi. Requires 1 <= l <= L.
CoupledOutput evaluate_coupled(const LevelHierarchy& h, std::size_t level, const rng::InputSample& xi);

/// Checks the structural contract (M_l increasing, m_l >= 1, costs > 0).
void validate(const LevelHierarchy& h);

/// Stable 64-bit FNV-1a hash, used for fingerprints and config hashes.
std::uint64_t fnv1a64(const std::string& text);
std::string hex64(std::uint64_t value);

/// Keeps only the listed levels of a base hierarchy (strictly increasing indices).
class LevelSubset final : public LevelHierarchy {
 public:
  LevelSubset(std::shared_ptr<const LevelHierarchy> base, std::vector<std::size_t> levels);

  std::string name() const override { return base_->name(); }
  std::size_t num_levels() const override { return levels_.size(); }
  std::size_t dof(std::size_t level) const override;
  std::size_t output_dim(std::size_t level) const override;
  double unit_cost(std::size_t level) const override;
  const std::vector<rng::Distribution>& inputs() const override { return base_->inputs(); }
  LevelOutput evaluate(std::size_t level, const rng::InputSample& xi) const override;
  double qoi(std::size_t level, const Eigen::VectorXd& q) const override;
  std::string fingerprint() const override;

  const std::vector<std::size_t>& levels() const { return levels_; }

 private:
  std::size_t map(std::size_t level) const;

  std::shared_ptr<const LevelHierarchy> base_;
  std::vector<std::size_t> levels_;
};

/// Replaces the declared per-level costs (used for measured-cost mode).
class CostOverride final : public LevelHierarchy {
 public:
  CostOverride(std::shared_ptr<const LevelHierarchy> base, std::vector<double> costs);

  std::string name() const override { return base_->name(); }
  std::size_t num_levels() const override { return base_->num_levels(); }
  std::size_t dof(std::size_t level) const override { return base_->dof(level); }
  std::size_t output_dim(std::size_t level) const override { return base_->output_dim(level); }
  double unit_cost(std::size_t level) const override;
  const std::vector<rng::Distribution>& inputs() const override { return base_->inputs(); }
  LevelOutput evaluate(std::size_t level, const rng::InputSample& xi) const override {
    return base_->evaluate(level, xi);
  }
  double qoi(std::size_t level, const Eigen::VectorXd& q) const override { return base_->qoi(level, q); }
  std::string fingerprint() const override { return base_->fingerprint(); }

 private:
  std::shared_ptr<const LevelHierarchy> base_;
  std::vector<double> costs_;
};

/// A hierarchy that ignores xi: q_l is the constant vector values[l] of length
/// m_l and Q is its mean. Useful as a zero-variance reference.
class DeterministicHierarchy final : public LevelHierarchy {
 public:
  DeterministicHierarchy(std::vector<double> values, std::size_t input_dim = 1,
                         std::size_t m0 = 4);

  std::string name() const override { return "deterministic"; }
  std::size_t num_levels() const override { return values_.size(); }
  std::size_t dof(std::size_t level) const override;
  std::size_t output_dim(std::size_t level) const override { return dof(level); }
  double unit_cost(std::size_t level) const override;
  const std::vector<rng::Distribution>& inputs() const override { return inputs_; }
  LevelOutput evaluate(std::size_t level, const rng::InputSample& xi) const override;
  double qoi(std::size_t level, const Eigen::VectorXd& q) const override;
  std::string fingerprint() const override;

 private:
  std::vector<double> values_;
  std::vector<rng::Distribution> inputs_;
  std::size_t m0_;
};

}  // namespace lrcv::models
