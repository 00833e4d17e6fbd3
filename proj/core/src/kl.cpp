#include "lrcv/kl.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lrcv/error.hpp"

namespace lrcv::models {

namespace {

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string("kernel ") + what + " must be positive");
  }
}

}  // namespace

Kernel Kernel::exponential(double variance, double length) {
  check_positive(variance, "variance");
  check_positive(length, "length");
  return {Kind::exponential, variance, length};
}

Kernel Kernel::squared_exponential(double variance, double length) {
  check_positive(variance, "variance");
  check_positive(length, "length");
  return {Kind::squared_exponential, variance, length};
}

Kernel Kernel::constant(double variance) {
  check_positive(variance, "variance");
  return {Kind::constant, variance, 1.0};
}

double Kernel::operator()(double x, double y) const {
  const double d = x - y;
  switch (kind) {
    case Kind::exponential:
      return variance * std::exp(-std::abs(d) / length);
    case Kind::squared_exponential:
      return variance * std::exp(-d * d / length);
    case Kind::constant:
      return variance;
  }
  return 0.0;
}

std::string Kernel::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case Kind::exponential:
      os << "exponential";
      break;
    case Kind::squared_exponential:
      os << "squared_exponential";
      break;
    case Kind::constant:
      os << "constant";
      break;
  }
  os << "(" << variance << "," << length << ")";
  return os.str();
}

std::vector<double> uniform_grid(std::size_t n) {
  if (n < 2) throw ConfigError("a grid needs at least 2 points");
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  return x;
}

KLField kl_decompose(const Kernel& kernel, std::vector<double> grid, std::size_t d) {
  const std::size_t n = grid.size();
  if (n < 2) throw ConfigError("kl_decompose: grid needs at least 2 points");
  if (d == 0 || d > n) {
    throw DimensionError("kl_decompose: need 1 <= d <= n (d=" + std::to_string(d) +
                         ", n=" + std::to_string(n) + ")");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(grid[i] > grid[i - 1])) throw ConfigError("kl_decompose: grid must be strictly increasing");
  }

  KLField f;
  f.kernel = kernel;
  f.weights.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = grid[i + 1] - grid[i];
    f.weights[i] += 0.5 * h;
    f.weights[i + 1] += 0.5 * h;
  }

  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::VectorXd sw(ni);
  for (Eigen::Index i = 0; i < ni; ++i) sw(i) = std::sqrt(f.weights[static_cast<std::size_t>(i)]);
  Eigen::MatrixXd b(ni, ni);
  for (Eigen::Index i = 0; i < ni; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = sw(i) * kernel(grid[static_cast<std::size_t>(i)], grid[static_cast<std::size_t>(j)]) * sw(j);
      b(i, j) = v;
      b(j, i) = v;
    }
  }
  f.trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) f.trace += f.weights[i] * kernel(grid[i], grid[i]);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
  if (eig.info() != Eigen::Success) throw NumericalError("kl_decompose: eigensolver failed");

  f.eigenvalues.resize(d);
  f.eigenvectors.resize(ni, static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < d; ++k) {
    const Eigen::Index src = ni - 1 - static_cast<Eigen::Index>(k);  // ascending order from Eigen
    f.eigenvalues[k] = std::max(0.0, eig.eigenvalues()(src));
    Eigen::VectorXd phi = eig.eigenvectors().col(src).cwiseQuotient(sw);
    // Sign convention: first clearly nonzero component positive.
    const double tol = 1e-10 * phi.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < ni; ++i) {
      if (std::abs(phi(i)) > tol) {
        if (phi(i) < 0.0) phi = -phi;
        break;
      }
    }
    f.eigenvectors.col(static_cast<Eigen::Index>(k)) = phi;
  }
  f.grid = std::move(grid);
  return f;
}

Eigen::MatrixXd KLField::scaled_modes(std::span<const double> x) const {
  const std::size_t n = grid.size();
  const auto d = static_cast<Eigen::Index>(modes());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(x.size()), d);
  const double lmax = eigenvalues.empty() ? 0.0 : eigenvalues.front();
  for (std::size_t p = 0; p < x.size(); ++p) {
    Eigen::VectorXd kx(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) kx(static_cast<Eigen::Index>(j)) = weights[j] * kernel(x[p], grid[j]);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double lam = eigenvalues[static_cast<std::size_t>(i)];
      // phi_i(x) = (1/lambda_i) sum_j w_j K(x, x_j) phi_i(x_j); negligible modes contribute 0.
      if (!(lam > 1e-14 * lmax)) {
        out(static_cast<Eigen::Index>(p), i) = 0.0;
        continue;
      }
      out(static_cast<Eigen::Index>(p), i) = kx.dot(eigenvectors.col(i)) / std::sqrt(lam);
    }
  }
  return out;
}

Eigen::VectorXd sample_field(const KLField& field, std::span<const double> xi) {
  if (xi.size() != field.modes()) {
    throw DimensionError("sample_field: expected " + std::to_string(field.modes()) +
                         " coefficients, got " + std::to_string(xi.size()));
  }
  const auto n = static_cast<Eigen::Index>(field.grid.size());
  Eigen::VectorXd out = Eigen::VectorXd::Constant(n, field.mean);
  for (std::size_t i = 0; i < xi.size(); ++i) {
    const double s = field.amplitude * std::sqrt(field.eigenvalues[i]) * xi[i];
    out += s * field.eigenvectors.col(static_cast<Eigen::Index>(i));
  }
  return out;
}

}  // namespace lrcv::models
