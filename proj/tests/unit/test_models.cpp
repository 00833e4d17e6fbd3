#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "lrcv/diffusion.hpp"
#include "lrcv/error.hpp"
#include "lrcv/kl.hpp"
#include "lrcv/linalg.hpp"
#include "lrcv/mlmc.hpp"
#include "lrcv/models.hpp"
#include "lrcv/synthetic.hpp"
#include "support/oracles.hpp"

using namespace lrcv;
using namespace lrcv::models;

namespace {

rng::InputSample zeros(std::size_t d) { return {std::vector<double>(d, 0.0)}; }

DiffusionParams unit_coefficient() {
  DiffusionParams p;
  p.abar = 0.0;
  p.field_scale = 0.0;  // a = exp(0) = 1
  p.base_cells = 8;
  p.levels = 3;
  return p;
}

}  // namespace

TEST(KL, ConstantKernelIsRankOne) {
  const auto f = kl_decompose(Kernel::constant(2.5), uniform_grid(65), 3);
  EXPECT_NEAR(f.eigenvalues[0], 2.5, 1e-12);
  EXPECT_NEAR(f.eigenvalues[1], 0.0, 1e-12);
  EXPECT_NEAR(f.trace, 2.5, 1e-12);
  for (Eigen::Index i = 0; i < f.eigenvectors.rows(); ++i) EXPECT_NEAR(f.eigenvectors(i, 0), 1.0, 1e-12);
}

TEST(KL, EigenpairsAreWeightedOrthonormalAndSorted) {
  const auto f = kl_decompose(Kernel::exponential(1.0, 0.5), uniform_grid(129), 6);
  double sum = 0.0;
  for (std::size_t i = 0; i < f.modes(); ++i) {
    if (i > 0) EXPECT_LE(f.eigenvalues[i], f.eigenvalues[i - 1]);
    sum += f.eigenvalues[i];
    for (std::size_t j = 0; j <= i; ++j) {
      double ip = 0.0;
      for (std::size_t k = 0; k < f.grid.size(); ++k)
        ip += f.weights[k] * f.eigenvectors(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) *
              f.eigenvectors(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
      EXPECT_NEAR(ip, i == j ? 1.0 : 0.0, 1e-10);
    }
  }
  EXPECT_LT(sum, f.trace);
  EXPECT_NEAR(f.trace, 1.0, 1e-12);
}

TEST(KL, InterpolationReproducesGridValues) {
  const auto f = kl_decompose(Kernel::squared_exponential(0.3, 0.3), uniform_grid(33), 4);
  const Eigen::MatrixXd m = f.scaled_modes(f.grid);
  for (std::size_t i = 0; i < f.modes(); ++i) {
    for (Eigen::Index k = 0; k < m.rows(); ++k) {
      EXPECT_NEAR(m(k, static_cast<Eigen::Index>(i)),
                  std::sqrt(f.eigenvalues[i]) * f.eigenvectors(k, static_cast<Eigen::Index>(i)), 1e-10);
    }
  }
}

TEST(KL, FieldVarianceMatchesTruncatedKernel) {
  const auto f = kl_decompose(Kernel::squared_exponential(0.3, 0.3), uniform_grid(65), 10);
  const std::vector<double> xi(10, 0.0);
  const Eigen::VectorXd g0 = sample_field(f, xi);
  EXPECT_NEAR(g0.cwiseAbs().maxCoeff(), 0.0, 0.0);
  double var_sum = 0.0;
  for (double l : f.eigenvalues) var_sum += l;
  EXPECT_NEAR(var_sum / f.trace, 1.0, 1e-3);
  EXPECT_THROW(sample_field(f, std::vector<double>(3, 0.0)), DimensionError);
}

TEST(Tridiagonal, SolvesKnownSystem) {
  Eigen::VectorXd lower(2), diag(3), upper(2), rhs(3);
  lower << -1, -1;
  diag << 2, 2, 2;
  upper << -1, -1;
  rhs << 1, 0, 1;
  const Eigen::VectorXd x = solve_tridiagonal(lower, diag, upper, rhs);
  EXPECT_NEAR(x(0), 1.0, 1e-15);
  EXPECT_NEAR(x(1), 1.0, 1e-15);
  EXPECT_NEAR(x(2), 1.0, 1e-15);
  diag(0) = 0.0;
  EXPECT_THROW(solve_tridiagonal(lower, diag, upper, rhs), NumericalError);
}

TEST(Diffusion, UnitCoefficientMatchesQuadraticSolution) {
  const Diffusion1D h(unit_coefficient());
  for (std::size_t l = 0; l < h.num_levels(); ++l) {
    const auto out = h.evaluate(l, zeros(h.input_dim()));
    const double dx = 1.0 / static_cast<double>(h.cells(l));
    ASSERT_EQ(out.q.size(), static_cast<Eigen::Index>(h.dof(l)));
    for (Eigen::Index j = 0; j < out.q.size(); ++j) {
      const double x = static_cast<double>(j + 1) * dx;
      EXPECT_NEAR(out.q(j), 0.5 * x * (1.0 - x), 1e-13);
    }
    // Trapezoid rule of x(1-x)/2 on n cells is 1/12 - h^2/12.
    EXPECT_NEAR(out.value, 1.0 / 12.0 - dx * dx / 12.0, 1e-14);
  }
}

TEST(Diffusion, FluxOfQuadraticIsExact) {
  auto p = unit_coefficient();
  p.qoi = DiffusionQoi::flux_at_left;
  const Diffusion1D h(p);
  for (std::size_t l = 0; l < h.num_levels(); ++l) EXPECT_NEAR(h.evaluate(l, zeros(h.input_dim())).value, -0.5, 1e-11);
}

TEST(Diffusion, StructureAndCosts) {
  auto p = DiffusionParams{};
  p.base_cells = 11;
  p.refinement = 4;
  p.levels = 3;
  p.cost_exponent = 2.0;
  const Diffusion1D h(p);
  EXPECT_NO_THROW(validate(h));
  EXPECT_EQ(h.dof(0), 10u);
  EXPECT_EQ(h.dof(1), 43u);
  EXPECT_EQ(h.dof(2), 175u);
  EXPECT_DOUBLE_EQ(h.unit_cost(1), 43.0 * 43.0);
  EXPECT_EQ(h.input_dim(), 10u);
  const auto c = h.coefficient(2, zeros(10));
  EXPECT_NEAR(c.minCoeff(), 1.1, 1e-14);
  EXPECT_THROW(h.evaluate(0, zeros(3)), DimensionError);
  EXPECT_THROW(h.evaluate(3, zeros(10)), DimensionError);
}

TEST(Diffusion, ConvergesUnderRefinement) {
  DiffusionParams p;
  p.levels = 5;
  p.base_cells = 8;
  const Diffusion1D h(p);
  const rng::InputSample xi = rng::draw_input({1, rng::Purpose::oracle(), 0}, h.inputs());
  std::vector<double> q;
  for (std::size_t l = 0; l < h.num_levels(); ++l) q.push_back(h.evaluate(l, xi).value);
  for (std::size_t l = 2; l < q.size(); ++l) {
    const double ratio = std::abs(q[l - 1] - q[l - 2]) / std::abs(q[l] - q[l - 1]);
    EXPECT_NEAR(ratio, 4.0, 0.8) << "level " << l;
  }
}

TEST(Synthetic, ExactRankWithoutPerturbation) {
  SyntheticParams p;
  p.delta = 0.0;
  const SyntheticLowRank h(p);
  const std::size_t n = 200;
  Eigen::MatrixXd u(static_cast<Eigen::Index>(h.output_dim(1)), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = rng::draw_input({11, rng::Purpose::pilot(1), i}, h.inputs());
    u.col(static_cast<Eigen::Index>(i)) = h.evaluate(1, xi).q;
  }
  const auto s = oracle::svd_oracle(u);
  std::size_t rank = 0;
  for (double v : s) rank += v > 1e-8 * s[0] ? 1 : 0;
  EXPECT_EQ(rank, 5u);
}

TEST(Synthetic, QoiIsMeanOfProfileCombination) {
  const SyntheticLowRank h(SyntheticParams{});
  const auto xi = rng::draw_input({2, rng::Purpose::oracle(), 5}, h.inputs());
  for (std::size_t l = 0; l < h.num_levels(); ++l) {
    const auto out = h.evaluate(l, xi);
    EXPECT_NEAR(out.value, out.q.mean(), 1e-15);
    EXPECT_EQ(h.qoi(l, out.q), out.value);
    const Eigen::VectorXd low = h.profile(l) * h.coefficients(xi);
    EXPECT_LE((out.q - low).cwiseAbs().maxCoeff(), 1e-3 * std::pow(0.5, static_cast<double>(l)) + 1e-15);
  }
  EXPECT_EQ(h.dof(2), 64u);
  EXPECT_DOUBLE_EQ(h.unit_cost(2), 64.0);
}

TEST(Hierarchy, CoupledEvaluationAndSubset) {
  auto base = std::make_shared<SyntheticLowRank>(SyntheticParams{});
  const auto xi = rng::draw_input({3, rng::Purpose::pilot(2), 0}, base->inputs());
  const auto c = evaluate_coupled(*base, 2, xi);
  EXPECT_EQ(c.fine.value, base->evaluate(2, xi).value);
  EXPECT_EQ(c.coarse.value, base->evaluate(1, xi).value);
  EXPECT_DOUBLE_EQ(c.cost, 64.0 + 32.0);
  EXPECT_THROW(evaluate_coupled(*base, 0, xi), DimensionError);
  EXPECT_DOUBLE_EQ(coupled_cost(*base, 0), 16.0);

  const LevelSubset sub(base, {0, 2});
  EXPECT_EQ(sub.num_levels(), 2u);
  EXPECT_EQ(sub.dof(1), 64u);
  EXPECT_EQ(sub.evaluate(1, xi).value, base->evaluate(2, xi).value);
  EXPECT_NE(sub.fingerprint(), base->fingerprint());
  EXPECT_THROW(LevelSubset(base, {1, 1}), ConfigError);
  EXPECT_THROW(LevelSubset(base, {0, 5}), ConfigError);

  const CostOverride co(base, {1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(co.unit_cost(2), 3.0);
  EXPECT_THROW(CostOverride(base, {1.0}), ConfigError);
}

TEST(Hierarchy, DeterministicModel) {
  const DeterministicHierarchy h({1.0, 1.5, 1.75});
  EXPECT_NO_THROW(validate(h));
  const auto xi = zeros(1);
  EXPECT_DOUBLE_EQ(h.evaluate(2, xi).value, 1.75);
  EXPECT_EQ(h.dof(0), 4u);
  EXPECT_EQ(h.dof(2), 16u);
}

TEST(Hierarchy, FingerprintHash) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(hex64(0xabcull), "0000000000000abc");
  SyntheticParams a, b;
  b.delta = 2e-3;
  EXPECT_NE(SyntheticLowRank(a).fingerprint(), SyntheticLowRank(b).fingerprint());
}
