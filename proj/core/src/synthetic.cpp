#include "lrcv/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "lrcv/error.hpp"

namespace lrcv::models {

SyntheticLowRank::SyntheticLowRank(const SyntheticParams& params) : p_(params) {
  if (p_.rank == 0 || p_.input_dim == 0 || p_.m0 == 0 || p_.levels == 0) {
    throw ConfigError("synthetic_low_rank: rank, input_dim, m0 and levels must be >= 1");
  }
  if (p_.refinement < 2) throw ConfigError("synthetic_low_rank: refinement must be >= 2");
  if (p_.rank > p_.m0) throw ConfigError("synthetic_low_rank: rank must not exceed m0");
  if (!(p_.delta >= 0.0) || !std::isfinite(p_.delta)) {
    throw ConfigError("synthetic_low_rank: delta must be finite and >= 0");
  }
  if (!(p_.cost_exponent > 0.0)) throw ConfigError("synthetic_low_rank: cost_exponent must be > 0");
  inputs_.assign(p_.input_dim, rng::Distribution::uniform(-1.0, 1.0));

  for (std::size_t l = 0; l < p_.levels; ++l) {
    const auto m = static_cast<Eigen::Index>(dof(l));
    Eigen::MatrixXd a(m, static_cast<Eigen::Index>(p_.rank));
    for (Eigen::Index i = 0; i < m; ++i) {
      const double x = static_cast<double>(i) / static_cast<double>(m);
      for (Eigen::Index k = 0; k < a.cols(); ++k) {
        a(i, k) = std::cos(static_cast<double>(k + 1) * std::numbers::pi * x);
      }
    }
    profiles_.push_back(std::move(a));
  }
}

std::size_t SyntheticLowRank::dof(std::size_t level) const {
  if (level >= p_.levels) throw DimensionError("level out of range");
  std::size_t m = p_.m0;
  for (std::size_t l = 0; l < level; ++l) m *= p_.refinement;
  return m;
}

double SyntheticLowRank::unit_cost(std::size_t level) const {
  return std::pow(static_cast<double>(dof(level)), p_.cost_exponent);
}

const Eigen::MatrixXd& SyntheticLowRank::profile(std::size_t level) const {
  if (level >= profiles_.size()) throw DimensionError("level out of range");
  return profiles_[level];
}

Eigen::VectorXd SyntheticLowRank::coefficients(const rng::InputSample& xi) const {
  const std::size_t d = p_.input_dim;
  if (xi.size() != d) throw DimensionError("synthetic_low_rank: input dimension mismatch");
  Eigen::VectorXd g(static_cast<Eigen::Index>(p_.rank));
  for (std::size_t k = 0; k < p_.rank; ++k) {
    const double a = 0.4 + 0.1 * static_cast<double>(k);
    g(static_cast<Eigen::Index>(k)) =
        std::exp(a * xi[k % d]) * (1.0 + 0.5 * xi[(k + 1) % d] * xi[(k + 2) % d]);
  }
  return g;
}

LevelOutput SyntheticLowRank::evaluate(std::size_t level, const rng::InputSample& xi) const {
  const Eigen::MatrixXd& a = profile(level);
  LevelOutput out;
  out.q = a * coefficients(xi);
  if (p_.delta > 0.0) {
    const double amp = p_.delta * std::pow(static_cast<double>(p_.refinement), -static_cast<double>(level));
    const double freq = 2.0 * std::numbers::pi * (1.0 + xi[0] * xi[0]);
    const double phase = xi[1 % p_.input_dim];
    const auto m = out.q.size();
    for (Eigen::Index i = 0; i < m; ++i) {
      const double x = static_cast<double>(i) / static_cast<double>(m);
      out.q(i) += amp * std::sin(freq * x + phase);
    }
  }
  out.value = qoi(level, out.q);
  return out;
}

double SyntheticLowRank::qoi(std::size_t level, const Eigen::VectorXd& q) const {
  if (q.size() != static_cast<Eigen::Index>(dof(level))) {
    throw DimensionError("synthetic_low_rank: q has the wrong length");
  }
  return q.mean();
}

std::string SyntheticLowRank::fingerprint() const {
  std::ostringstream os;
  os.precision(17);
  os << "synthetic_low_rank;rank=" << p_.rank << ";d=" << p_.input_dim << ";m0=" << p_.m0
     << ";s=" << p_.refinement << ";levels=" << p_.levels << ";delta=" << p_.delta
     << ";gamma=" << p_.cost_exponent;
  return os.str();
}

}  // namespace lrcv::models
