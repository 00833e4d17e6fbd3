#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lrcv::models {

/// Stationary covariance kernel on [0, 1].
struct Kernel {
  enum class Kind { exponential, squared_exponential, constant };

  Kind kind = Kind::squared_exponential;
  double variance = 1.0;  // sigma^2
  double length = 1.0;    // l

  /// sigma^2 exp(-|x - y| / l)
  static Kernel exponential(double variance, double length);
  /// sigma^2 exp(-|x - y|^2 / l)
  static Kernel squared_exponential(double variance, double length);
  /// sigma^2 everywhere (rank one).
  static Kernel constant(double variance);

  double operator()(double x, double y) const;
  std::string describe() const;
};

/// Truncated Karhunen-Loeve expansion of a kernel, discretized by the Nystrom
/// method with trapezoid weights.
struct KLField {
  Kernel kernel;
  std::vector<double> grid;
  std::vector<double> weights;
  std::vector<double> eigenvalues;  // descending, length d
  Eigen::MatrixXd eigenvectors;     // n x d, orthonormal under the weights
  double trace = 0.0;               // sum_j w_j K(x_j, x_j)
  double mean = 0.0;
  double amplitude = 1.0;

  std::size_t modes() const { return eigenvalues.size(); }

  /// sqrt(lambda_i) phi_i(x_k) for arbitrary points, via Nystrom interpolation.
  Eigen::MatrixXd scaled_modes(std::span<const double> x) const;
};

/// n equally spaced points on [0, 1], endpoints included (n >= 2).
std::vector<double> uniform_grid(std::size_t n);

/// Requires a strictly increasing grid of at least 2 points and 1 <= d <= n.
KLField kl_decompose(const Kernel& kernel, std::vector<double> grid, std::size_t d);

/// mean + amplitude * sum_i sqrt(lambda_i) phi_i xi_i on the field's grid.
Eigen::VectorXd sample_field(const KLField& field, std::span<const double> xi);

}  // namespace lrcv::models
