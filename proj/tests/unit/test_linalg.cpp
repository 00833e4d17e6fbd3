#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "lrcv/error.hpp"
#include "lrcv/linalg.hpp"
#include "support/oracles.hpp"

using namespace lrcv;
using namespace lrcv::linalg;

namespace {

std::vector<double> decaying(std::size_t k, double rate) {
  std::vector<double> s(k);
  for (std::size_t i = 0; i < k; ++i) s[i] = std::pow(rate, static_cast<double>(i));
  return s;
}

DenseMatrix permuted(const DenseMatrix& u, const std::vector<std::size_t>& perm) {
  DenseMatrix out(u.rows(), u.cols());
  for (std::size_t k = 0; k < perm.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = u.col(static_cast<Eigen::Index>(perm[k]));
  return out;
}

}  // namespace

TEST(PivotedQR, FactorsPermutedMatrix) {
  const DenseMatrix u = oracle::matrix_with_spectrum(30, 50, decaying(30, 0.5), 1);
  const auto f = pivoted_qr(u, Termination::fixed(8));
  ASSERT_EQ(f.rank(), 8u);
  const auto r = static_cast<Eigen::Index>(f.rank());
  EXPECT_LT((f.q.transpose() * f.q - DenseMatrix::Identity(r, r)).norm(), 1e-13);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < i; ++j) EXPECT_EQ(f.r11(i, j), 0.0);

  DenseMatrix qr(u.rows(), u.cols());
  qr << f.q * f.r11, f.q * f.r12;
  const DenseMatrix up = permuted(u, f.permutation);
  EXPECT_NEAR((up - qr).norm(), f.residual_frobenius, 1e-12);

  std::vector<std::size_t> sorted = f.permutation;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(u.cols());
  std::iota(iota.begin(), iota.end(), 0);
  EXPECT_EQ(sorted, iota);
}

TEST(PivotedQR, PicksLargestColumnFirst) {
  DenseMatrix u = DenseMatrix::Zero(3, 4);
  u.col(0) << 1, 0, 0;
  u.col(1) << 0, 3, 0;
  u.col(2) << 0, 0, 2;
  u.col(3) << 1, 1, 0;
  const auto f = pivoted_qr(u, Termination::fixed(3));
  EXPECT_EQ(f.permutation[0], 1u);
  EXPECT_EQ(f.permutation[1], 2u);
}

TEST(PivotedQR, ToleranceBoundsSpectralResidual) {
  const DenseMatrix u = oracle::matrix_with_spectrum(40, 80, decaying(40, 0.3), 2);
  for (double eps : {1e-2, 1e-5, 1e-9}) {
    const auto f = pivoted_qr(u, Termination::tol(eps));
    EXPECT_LE(f.residual_frobenius, eps);
    DenseMatrix qr(u.rows(), u.cols());
    qr << f.q * f.r11, f.q * f.r12;
    EXPECT_LE(spectral_norm(permuted(u, f.permutation) - qr), eps * (1 + 1e-12));
  }
}

TEST(PivotedQR, ToleranceCanGiveRankZero) {
  const DenseMatrix u = 1e-8 * DenseMatrix::Ones(4, 6);
  EXPECT_EQ(pivoted_qr(u, Termination::tol(1e-3)).rank(), 0u);
  EXPECT_THROW(interpolative_decomposition(u, Termination::tol(1e-3)), EmptyRankError);
}

TEST(PivotedQR, RejectsBadInput) {
  DenseMatrix u = DenseMatrix::Ones(3, 3);
  EXPECT_THROW(pivoted_qr(u, Termination::fixed(4)), DimensionError);
  EXPECT_THROW(pivoted_qr(u, Termination::fixed(0)), DimensionError);
  u(1, 1) = std::nan("");
  EXPECT_THROW(pivoted_qr(u, Termination::fixed(1)), DataError);
}

TEST(SolveT, BackSubstitution) {
  DenseMatrix r11(2, 2);
  r11 << 2, 1, 0, 4;
  DenseMatrix r12(2, 1);
  r12 << 5, 8;
  const DenseMatrix t = solve_T(r11, r12);
  EXPECT_NEAR(t(1, 0), 2.0, 1e-15);
  EXPECT_NEAR(t(0, 0), 1.5, 1e-15);
}

TEST(SolveT, IllConditionedFallsBackToMinimumNorm) {
  DenseMatrix r11(2, 2);
  r11 << 1, 1, 0, 1e-14;
  DenseMatrix r12(2, 1);
  r12 << 2, 0;
  const DenseMatrix t = solve_T(r11, r12);
  ASSERT_TRUE(t.allFinite());
  EXPECT_NEAR((r11 * t - r12).norm(), 0.0, 1e-10);
  EXPECT_NEAR(t(0, 0), 1.0, 1e-10);
  EXPECT_NEAR(t(1, 0), 1.0, 1e-10);
}

TEST(InterpolativeDecomposition, IdentityBlockIsExact) {
  const DenseMatrix u = oracle::matrix_with_spectrum(20, 60, decaying(20, 0.4), 3);
  const auto id = interpolative_decomposition(u, Termination::fixed(6));
  ASSERT_EQ(id.rank, 6u);
  for (std::size_t k = 0; k < id.rank; ++k) {
    for (std::size_t i = 0; i < id.rank; ++i) {
      EXPECT_EQ(id.coefficients(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(id.selected_indices[k])),
                i == k ? 1.0 : 0.0);
    }
  }
  const DenseMatrix approx = select_columns(u, id.selected_indices) * id.coefficients;
  EXPECT_NEAR(spectral_norm(u - approx), id.residual_norm, 1e-12);
  const auto sigma = oracle::svd_oracle(u);
  EXPECT_LE(id.residual_norm, std::sqrt(6.0 * 54.0 + 1.0) * sigma[6] * 1.5);
}

TEST(InterpolativeDecomposition, ExactLowRankIsRecovered) {
  const DenseMatrix u = oracle::matrix_with_spectrum(25, 40, {3.0, 2.0, 1.0, 0.5}, 4);
  const auto id = interpolative_decomposition(u, Termination::tol(1e-10));
  EXPECT_EQ(id.rank, 4u);
  EXPECT_LT(id.residual_norm, 1e-10);
}

TEST(InterpolativeDecomposition, FixedRankAboveNumericalRank) {
  const DenseMatrix u = oracle::matrix_with_spectrum(10, 12, {1.0, 0.5}, 5);
  const auto id = interpolative_decomposition(u, Termination::fixed(4));
  EXPECT_EQ(id.rank, 4u);
  EXPECT_TRUE(id.coefficients.allFinite());
  EXPECT_LT(id.residual_norm, 1e-12);
}

TEST(SingularValues, MatchOracle) {
  const DenseMatrix u = oracle::matrix_with_spectrum(15, 9, {5, 4, 3, 2, 1}, 6);
  const auto s = singular_values(u);
  const auto o = oracle::svd_oracle(u);
  ASSERT_EQ(s.size(), o.size());
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], o[i], 1e-13);
  EXPECT_NEAR(spectral_norm(u), 5.0, 1e-13);
}

TEST(LeastSquares, MatchesNormalEquations) {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> g;
  DenseMatrix a(30, 5);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(gen);
  Vector b(30);
  for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = g(gen);
  const Vector x = least_squares(a, b);
  const Vector ref = (a.transpose() * a).ldlt().solve(a.transpose() * b);
  EXPECT_LT((x - ref).norm(), 1e-12);
  const LeastSquaresSolver solver(a);
  EXPECT_FALSE(solver.truncated());
  EXPECT_EQ(solver.solve(b), x);
}

TEST(LeastSquares, ConsistentSystemIsSolvedExactly) {
  DenseMatrix a(4, 2);
  a << 1, 0, 0, 1, 1, 1, 2, -1;
  Vector c(2);
  c << 0.5, -2.0;
  EXPECT_LT((least_squares(a, a * c) - c).norm(), 1e-14);
}

TEST(LeastSquares, RankDeficientBasisUsesPseudoInverse) {
  DenseMatrix a(5, 3);
  a.col(0) << 1, 2, 3, 4, 5;
  a.col(1) << 0, 1, 0, 1, 0;
  a.col(2) = a.col(0);
  const LeastSquaresSolver solver(a);
  EXPECT_TRUE(solver.truncated());
  const Vector b = a.col(0) + a.col(1);
  const Vector x = solver.solve(b);
  EXPECT_LT((a * x - b).norm(), 1e-10);
  EXPECT_NEAR(x(0), x(2), 1e-10);
}

TEST(LeastSquares, DimensionMismatch) {
  const LeastSquaresSolver solver(DenseMatrix::Identity(3, 2));
  EXPECT_THROW(solver.solve(Vector::Ones(4)), DimensionError);
}
