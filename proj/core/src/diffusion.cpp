#include "lrcv/diffusion.hpp"

#include <cmath>
#include <sstream>

#include "lrcv/error.hpp"

namespace lrcv::models {

Eigen::VectorXd solve_tridiagonal(const Eigen::VectorXd& lower, const Eigen::VectorXd& diag,
                                  const Eigen::VectorXd& upper, const Eigen::VectorXd& rhs) {
  const Eigen::Index n = diag.size();
  if (n == 0 || rhs.size() != n || lower.size() != n - 1 || upper.size() != n - 1) {
    throw DimensionError("solve_tridiagonal: inconsistent sizes");
  }
  Eigen::VectorXd c(n), d(n);
  double piv = diag(0);
  if (!(std::abs(piv) > 0.0) || !std::isfinite(piv)) throw NumericalError("singular tridiagonal system");
  c(0) = n > 1 ? upper(0) / piv : 0.0;
  d(0) = rhs(0) / piv;
  for (Eigen::Index i = 1; i < n; ++i) {
    piv = diag(i) - lower(i - 1) * c(i - 1);
    if (!(std::abs(piv) > 0.0) || !std::isfinite(piv)) throw NumericalError("singular tridiagonal system");
    c(i) = i + 1 < n ? upper(i) / piv : 0.0;
    d(i) = (rhs(i) - lower(i - 1) * d(i - 1)) / piv;
  }
  for (Eigen::Index i = n - 2; i >= 0; --i) d(i) -= c(i) * d(i + 1);
  return d;
}

Diffusion1D::Diffusion1D(const DiffusionParams& params) : p_(params) {
  if (p_.levels == 0) throw ConfigError("diffusion_1d: levels must be >= 1");
  if (p_.refinement < 2) throw ConfigError("diffusion_1d: refinement must be >= 2");
  if (p_.base_cells < 3) throw ConfigError("diffusion_1d: base_cells must be >= 3");
  if (p_.kl_modes == 0) throw ConfigError("diffusion_1d: kl_modes must be >= 1");
  if (!(p_.abar >= 0.0) || !std::isfinite(p_.abar)) throw ConfigError("diffusion_1d: abar must be >= 0");
  if (!std::isfinite(p_.field_scale)) throw ConfigError("diffusion_1d: field_scale must be finite");
  if (!(p_.cost_exponent > 0.0)) throw ConfigError("diffusion_1d: cost_exponent must be > 0");
  inputs_.assign(p_.kl_modes, p_.input);
  field_ = kl_decompose(p_.kernel, uniform_grid(p_.kl_grid), p_.kl_modes);
  for (std::size_t l = 0; l < p_.levels; ++l) {
    const std::size_t n = cells(l);
    std::vector<double> mid(n);
    for (std::size_t i = 0; i < n; ++i) mid[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    midpoint_modes_.push_back(field_.scaled_modes(mid));
  }
}

std::size_t Diffusion1D::cells(std::size_t level) const {
  if (level >= p_.levels) throw DimensionError("level out of range");
  std::size_t n = p_.base_cells;
  for (std::size_t l = 0; l < level; ++l) n *= p_.refinement;
  return n;
}

std::size_t Diffusion1D::dof(std::size_t level) const { return cells(level) - 1; }

double Diffusion1D::unit_cost(std::size_t level) const {
  return std::pow(static_cast<double>(dof(level)), p_.cost_exponent);
}

Eigen::VectorXd Diffusion1D::coefficient(std::size_t level, const rng::InputSample& xi) const {
  if (level >= p_.levels) throw DimensionError("level out of range");
  if (xi.size() != p_.kl_modes) throw DimensionError("diffusion_1d: input dimension mismatch");
  const Eigen::Map<const Eigen::VectorXd> x(xi.values.data(), static_cast<Eigen::Index>(xi.size()));
  const Eigen::VectorXd g = midpoint_modes_[level] * x;
  return (p_.field_scale * g).array().exp() + p_.abar;
}

LevelOutput Diffusion1D::evaluate(std::size_t level, const rng::InputSample& xi) const {
  const Eigen::VectorXd a = coefficient(level, xi);
  const auto n = static_cast<Eigen::Index>(cells(level));
  const double h = 1.0 / static_cast<double>(n);
  const double ih2 = 1.0 / (h * h);
  const Eigen::Index m = n - 1;
  Eigen::VectorXd diag(m), off(m - 1);
  for (Eigen::Index j = 0; j < m; ++j) diag(j) = (a(j) + a(j + 1)) * ih2;
  for (Eigen::Index j = 0; j + 1 < m; ++j) off(j) = -a(j + 1) * ih2;
  LevelOutput out;
  try {
    out.q = solve_tridiagonal(off, diag, off, Eigen::VectorXd::Ones(m));
  } catch (const NumericalError& e) {
    throw ModelError(std::string("diffusion_1d: ") + e.what(), level, xi.values);
  }
  out.value = qoi(level, out.q);
  if (!std::isfinite(out.value)) {
    throw ModelError("diffusion_1d: non-finite QoI", level, xi.values);
  }
  return out;
}

double Diffusion1D::qoi(std::size_t level, const Eigen::VectorXd& q) const {
  if (q.size() != static_cast<Eigen::Index>(dof(level))) {
    throw DimensionError("diffusion_1d: q has the wrong length");
  }
  const double h = 1.0 / static_cast<double>(cells(level));
  if (p_.qoi == DiffusionQoi::integral_of_u) return h * q.sum();
  return -(4.0 * q(0) - q(1)) / (2.0 * h);
}

std::string Diffusion1D::fingerprint() const {
  std::ostringstream os;
  os.precision(17);
  os << "diffusion_1d;kernel=" << p_.kernel.describe() << ";d=" << p_.kl_modes
     << ";kl_grid=" << p_.kl_grid << ";abar=" << p_.abar << ";scale=" << p_.field_scale
     << ";input=" << p_.input.describe() << ";n0=" << p_.base_cells << ";s=" << p_.refinement
     << ";levels=" << p_.levels
     << ";qoi=" << (p_.qoi == DiffusionQoi::integral_of_u ? "integral_of_u" : "flux_at_left")
     << ";gamma=" << p_.cost_exponent;
  return os.str();
}

}  // namespace lrcv::models
