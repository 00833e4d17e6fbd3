#include "lrcv/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace lrcv::linalg {

std::string Termination::describe() const {
  std::ostringstream os;
  os.precision(17);
  if (mode == Mode::fixed_rank) {
    os << "rank=" << rank;
  } else {
    os << "tol=" << tolerance;
  }
  return os.str();
}

void require_finite(const DenseMatrix& u, const char* what) {
  if (!u.allFinite()) {
    throw DataError(std::string(what) + ": matrix contains non-finite entries");
  }
}

namespace {

// Orthogonalizes v against the first k columns of q twice (classical "twice is enough").
void reorthogonalize(const DenseMatrix& q, Eigen::Index k, Vector& v) {
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index j = 0; j < k; ++j) {
      v -= q.col(j).dot(v) * q.col(j);
    }
  }
}

// A unit vector orthogonal to the first k columns of q, taken from the canonical basis.
Vector complete_basis(const DenseMatrix& q, Eigen::Index k) {
  const Eigen::Index m = q.rows();
  Vector best;
  double best_norm = -1.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    Vector e = Vector::Unit(m, i);
    reorthogonalize(q, k, e);
    const double n = e.norm();
    if (n > best_norm) {
      best_norm = n;
      best = std::move(e);
    }
    if (n > 0.5) break;
  }
  return best / best_norm;
}

}  // namespace

PivotedQR pivoted_qr(const DenseMatrix& u, const Termination& termination) {
  const Eigen::Index m = u.rows();
  const Eigen::Index n = u.cols();
  if (m == 0 || n == 0) {
    throw DimensionError("pivoted_qr: empty matrix");
  }
  require_finite(u, "pivoted_qr");
  const auto kmax = static_cast<std::size_t>(std::min(m, n));
  if (termination.mode == Termination::Mode::fixed_rank) {
    if (termination.rank == 0) {
      throw DimensionError("pivoted_qr: fixed rank must be at least 1");
    }
    if (termination.rank > kmax) {
      throw DimensionError("pivoted_qr: rank " + std::to_string(termination.rank) +
                           " exceeds min(m, N) = " + std::to_string(kmax));
    }
  } else if (!(termination.tolerance >= 0.0) || !std::isfinite(termination.tolerance)) {
    throw ConfigError("pivoted_qr: tolerance must be finite and non-negative");
  }

  DenseMatrix w = u;  // residual, columns kept in pivoted order
  std::vector<std::size_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  DenseMatrix q(m, static_cast<Eigen::Index>(kmax));
  DenseMatrix r = DenseMatrix::Zero(static_cast<Eigen::Index>(kmax), n);
  const double scale = u.norm();
  const double tiny = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();

  Eigen::Index k = 0;
  for (; k < static_cast<Eigen::Index>(kmax); ++k) {
    // Norms are recomputed from the deflated columns rather than downdated.
    Eigen::Index pivot = k;
    double pivot_norm2 = -1.0;
    double remaining2 = 0.0;
    for (Eigen::Index j = k; j < n; ++j) {
      const double c2 = w.col(j).squaredNorm();
      remaining2 += c2;
      if (c2 > pivot_norm2) {
        pivot_norm2 = c2;
        pivot = j;
      }
    }
    if (termination.mode == Termination::Mode::tolerance) {
      if (std::sqrt(remaining2) <= termination.tolerance) break;
    } else if (static_cast<std::size_t>(k) == termination.rank) {
      break;
    }

    if (pivot != k) {
      w.col(k).swap(w.col(pivot));
      std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(pivot)]);
      r.col(k).swap(r.col(pivot));
    }

    Vector v = w.col(k);
    const double vnorm = v.norm();
    if (vnorm <= std::max(tiny, 1e-15 * scale)) {
      v = complete_basis(q, k);
    } else {
      v /= vnorm;
      reorthogonalize(q, k, v);
      v.normalize();
    }
    q.col(k) = v;
    for (Eigen::Index j = k; j < n; ++j) {
      const double rkj = v.dot(w.col(j));
      r(k, j) = rkj;
      w.col(j) -= rkj * v;
    }
  }

  PivotedQR out;
  out.q = q.leftCols(k);
  out.r11 = r.topLeftCorner(k, k).triangularView<Eigen::Upper>();
  out.r12 = r.block(0, k, k, n - k);
  out.permutation = std::move(perm);
  out.residual_frobenius = w.rightCols(n - k).norm();
  return out;
}

DenseMatrix solve_T(const DenseMatrix& r11, const DenseMatrix& r12) {
  const Eigen::Index r = r11.rows();
  if (r11.cols() != r || r12.rows() != r) {
    throw DimensionError("solve_T: R11 must be square and match the rows of R12");
  }
  if (r == 0) return DenseMatrix(0, r12.cols());
  require_finite(r11, "solve_T");
  require_finite(r12, "solve_T");

  Eigen::JacobiSVD<DenseMatrix> svd(r11, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& sigma = svd.singularValues();
  const double smax = sigma(0);
  const double smin = sigma(r - 1);
  const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();

  if (cond < kConditionLimit) {
    DenseMatrix t = r12;
    for (Eigen::Index col = 0; col < t.cols(); ++col) {
      for (Eigen::Index i = r - 1; i >= 0; --i) {
        double acc = t(i, col);
        for (Eigen::Index j = i + 1; j < r; ++j) acc -= r11(i, j) * t(j, col);
        t(i, col) = acc / r11(i, i);
      }
    }
    return t;
  }

  // Minimum-norm solution: T = V_k diag(1/sigma_k) U_k^T R12 over sigma_k > sigma_1 * cutoff.
  DenseMatrix t = DenseMatrix::Zero(r, r12.cols());
  const double cut = smax * kSvdCutoff;
  for (Eigen::Index i = 0; i < r; ++i) {
    if (!(sigma(i) > cut)) break;
    const Eigen::RowVectorXd proj = svd.matrixU().col(i).transpose() * r12;
    t.noalias() += svd.matrixV().col(i) * (proj / sigma(i));
  }
  return t;
}

DenseMatrix select_columns(const DenseMatrix& u, const std::vector<std::size_t>& indices) {
  DenseMatrix out(u.rows(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= static_cast<std::size_t>(u.cols())) {
      throw DimensionError("select_columns: index out of range");
    }
    out.col(static_cast<Eigen::Index>(k)) = u.col(static_cast<Eigen::Index>(indices[k]));
  }
  return out;
}

IDFactorization interpolative_decomposition(const DenseMatrix& u, const Termination& termination) {
  const PivotedQR qr = pivoted_qr(u, termination);
  const std::size_t r = qr.rank();
  if (r == 0) {
    throw EmptyRankError("interpolative_decomposition: tolerance admits rank 0");
  }
  const DenseMatrix t = solve_T(qr.r11, qr.r12);

  IDFactorization id;
  id.rank = r;
  id.selected_indices.assign(qr.permutation.begin(), qr.permutation.begin() + static_cast<std::ptrdiff_t>(r));
  const auto ri = static_cast<Eigen::Index>(r);
  id.coefficients = DenseMatrix::Zero(ri, u.cols());
  for (std::size_t k = 0; k < r; ++k) {
    id.coefficients(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(qr.permutation[k])) = 1.0;
  }
  for (Eigen::Index j = 0; j < t.cols(); ++j) {
    id.coefficients.col(static_cast<Eigen::Index>(qr.permutation[r + static_cast<std::size_t>(j)])) = t.col(j);
  }
  const DenseMatrix resid = u - select_columns(u, id.selected_indices) * id.coefficients;
  id.residual_norm = spectral_norm(resid);
  return id;
}

std::vector<double> singular_values(const DenseMatrix& u) {
  require_finite(u, "singular_values");
  if (u.size() == 0) return {};
  Eigen::JacobiSVD<DenseMatrix> svd(u);
  const Vector& s = svd.singularValues();
  return {s.data(), s.data() + s.size()};
}

double spectral_norm(const DenseMatrix& u) {
  if (u.size() == 0) return 0.0;
  const auto s = singular_values(u);
  return s.front();
}

LeastSquaresSolver::LeastSquaresSolver(DenseMatrix basis) : basis_(std::move(basis)) {
  if (basis_.cols() == 0 || basis_.rows() < basis_.cols()) {
    throw DimensionError("least_squares: basis must be m x r with 1 <= r <= m");
  }
  require_finite(basis_, "least_squares");
  Eigen::JacobiSVD<DenseMatrix> svd(basis_, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  cond_ = smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
  if (cond_ < kConditionLimit) {
    qr_.compute(basis_);
    return;
  }
  use_pinv_ = true;
  pinv_ = DenseMatrix::Zero(basis_.cols(), basis_.rows());
  const double cut = s(0) * kSvdCutoff;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (!(s(i) > cut)) break;
    pinv_.noalias() += svd.matrixV().col(i) * (svd.matrixU().col(i).transpose() / s(i));
  }
}

Vector LeastSquaresSolver::solve(const Vector& rhs) const {
  if (rhs.size() != basis_.rows()) {
    throw DimensionError("least_squares: right-hand side has length " + std::to_string(rhs.size()) +
                         ", expected " + std::to_string(basis_.rows()));
  }
  if (use_pinv_) return pinv_ * rhs;
  return qr_.solve(rhs);
}

Vector least_squares(const DenseMatrix& uc, const Vector& q) {
  return LeastSquaresSolver(uc).solve(q);
}

}  // namespace lrcv::linalg
