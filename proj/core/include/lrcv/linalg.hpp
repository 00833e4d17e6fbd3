#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrcv/error.hpp"

namespace lrcv::linalg {

using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thrown when a tolerance-terminated factorization keeps no column at all.
class EmptyRankError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Stopping rule for the pivoted Gram-Schmidt process.
struct Termination {
  enum class Mode { fixed_rank, tolerance };

  Mode mode = Mode::fixed_rank;
  std::size_t rank = 1;
  double tolerance = 0.0;

  static Termination fixed(std::size_t r) { return {Mode::fixed_rank, r, 0.0}; }
  static Termination tol(double eps) { return {Mode::tolerance, 0, eps}; }

  std::string describe() const;
};

/// U P = Q [R11 | R12] + (trailing residual).
struct PivotedQR {
  DenseMatrix q;    // m x r, orthonormal columns
  DenseMatrix r11;  // r x r, upper triangular
  DenseMatrix r12;  // r x (N - r)
  std::vector<std::size_t> permutation;  // column permutation[k] of U sits at position k
  double residual_frobenius = 0.0;       // ||U P - Q [R11 | R12]||_F

  std::size_t rank() const { return static_cast<std::size_t>(r11.rows()); }
};

/// Greedy column-pivoted Gram-Schmidt (modified, with re-orthogonalization).
/// Tolerance mode stops once the Frobenius norm of the remaining residual is at
/// most eps, which bounds the spectral residual; the result may have rank 0.
PivotedQR pivoted_qr(const DenseMatrix& u, const Termination& termination);

/// Solves R11 T = R12. Back-substitution when cond(R11) < 1e10, otherwise the
/// minimum-norm solution through a truncated SVD (cutoff sigma_1 * 1e-12).
DenseMatrix solve_T(const DenseMatrix& r11, const DenseMatrix& r12);

inline constexpr double kConditionLimit = 1e10;
inline constexpr double kSvdCutoff = 1e-12;

struct IDFactorization {
  std::vector<std::size_t> selected_indices;
  DenseMatrix coefficients;  // r x N, C = [I | T] P^T
  std::size_t rank = 0;
  double residual_norm = 0.0;  // ||U - U(:, selected) C||_2
};

/// Column interpolative decomposition U ~ U(:, selected) C. Throws
/// EmptyRankError when the tolerance admits rank 0.
IDFactorization interpolative_decomposition(const DenseMatrix& u, const Termination& termination);

/// Gathers the columns listed in `indices`.
DenseMatrix select_columns(const DenseMatrix& u, const std::vector<std::size_t>& indices);

/// Singular values in descending order.
std::vector<double> singular_values(const DenseMatrix& u);

double spectral_norm(const DenseMatrix& u);

/// Least-squares solver for a fixed basis. The factorization is computed once
/// in the constructor; solve() is const and safe to share between threads.
class LeastSquaresSolver {
 public:
  explicit LeastSquaresSolver(DenseMatrix basis);

  Vector solve(const Vector& rhs) const;

  Eigen::Index rows() const { return basis_.rows(); }
  Eigen::Index cols() const { return basis_.cols(); }
  const DenseMatrix& basis() const { return basis_; }
  /// True when the basis was too ill-conditioned for QR and a truncated
  /// pseudo-inverse is used instead.
  bool truncated() const { return use_pinv_; }
  double condition_number() const { return cond_; }

 private:
  DenseMatrix basis_;
  Eigen::HouseholderQR<DenseMatrix> qr_;
  DenseMatrix pinv_;
  bool use_pinv_ = false;
  double cond_ = 1.0;
};

/// One-shot convenience wrapper around LeastSquaresSolver.
Vector least_squares(const DenseMatrix& uc, const Vector& q);

/// Throws DataError if any entry is NaN or infinite.
void require_finite(const DenseMatrix& u, const char* what);

}  // namespace lrcv::linalg
