#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <memory>

#include "lrcv/basis_io.hpp"
#include "lrcv/error.hpp"
#include "lrcv/mlcv.hpp"
#include "lrcv/synthetic.hpp"

using namespace lrcv;
using namespace lrcv::mlcv;

namespace {

models::SyntheticParams exact_params() {
  models::SyntheticParams p;
  p.delta = 0.0;
  return p;
}

MlcvPilot prepared(const models::LevelHierarchy& h, std::size_t n_pilot, std::uint64_t seed, std::size_t rank) {
  auto pilot = mlmc::pilot_mlmc(h, n_pilot, seed);
  const std::vector<linalg::Termination> terms(h.num_levels() - 1, linalg::Termination::fixed(rank));
  return prepare_mlcv(h, std::move(pilot), terms);
}

}  // namespace

TEST(ZbarRule, ProportionalRule) {
  const auto z = allocate_zbar(0.99, 1.0 / 3.0, 10.0);
  EXPECT_NEAR(z.s1, std::sqrt(0.99 / (1.0 / 3.0 * 0.01)), 1e-12);
  EXPECT_EQ(z.multiplier, 10.0);
  EXPECT_TRUE(z.enabled);
  const auto small = allocate_zbar(0.5, 0.5, 10.0);
  EXPECT_NEAR(small.multiplier, std::sqrt(2.0) - 1.0, 1e-15);
  const auto off = allocate_zbar(0.1, 0.5, 10.0);
  EXPECT_EQ(off.multiplier, 0.0);
  EXPECT_FALSE(off.enabled);
  EXPECT_TRUE(std::isinf(allocate_zbar(1.0, 0.2).s1));
  EXPECT_THROW(allocate_zbar(0.5, 0.5, 1.0), ConfigError);
}

TEST(ThetaStar, Formula) {
  EXPECT_DOUBLE_EQ(theta_star(2.0, 4.0, 0.1), 0.5 / 1.1);
  EXPECT_EQ(theta_star(2.0, 0.0, 0.1), 0.0);
}

TEST(AllocateMlcv, HandEvaluatedTwoLevelPlan) {
  const std::vector<double> v{4.0, 1.0}, c{1.0, 4.0}, rho{0.0, 0.96}, ratio{0.0, 0.1};
  const auto plan = allocate_mlcv(v, c, rho, ratio, std::sqrt(2.0));
  EXPECT_EQ(plan.n, (std::vector<std::size_t>{6, 2}));
  EXPECT_NEAR(plan.variances[1], 1.0 - 0.96 / 1.1, 1e-15);
}

TEST(AllocateMlcv, ZeroCorrelationIsMlmc) {
  const std::vector<double> v{2.0, 0.5, 0.1}, c{1.0, 3.0, 9.0}, zero(3, 0.0), ratio{0.0, 0.4, 0.2};
  for (double eps : {0.3, 0.05}) {
    EXPECT_EQ(allocate_mlcv(v, c, zero, ratio, eps).n, mlmc::allocate_mlmc(v, c, eps).n);
  }
}

TEST(AllocateMlcv, PerfectCorrelationReachesFloor) {
  const std::vector<double> v{2.0, 0.5, 0.1}, c{1.0, 3.0, 9.0}, one{0.0, 1.0, 1.0}, ratio(3, 0.0);
  const auto plan = allocate_mlcv(v, c, one, ratio, 0.01);
  EXPECT_EQ(plan.n[1], mlmc::kMinSamples);
  EXPECT_EQ(plan.n[2], mlmc::kMinSamples);
}

TEST(ReducedBasis, ExactLowRankGivesExactControlVariate) {
  const models::SyntheticLowRank h(exact_params());
  const auto mp = prepared(h, 60, 3, 5);
  for (std::size_t l = 1; l < 3; ++l) {
    ASSERT_TRUE(mp.bases[l].has_value());
    const auto& b = *mp.bases[l];
    EXPECT_EQ(b.rank, 5u);
    EXPECT_LT(b.id_residual, 1e-10);
    EXPECT_EQ(b.coarse_basis.rows(), static_cast<Eigen::Index>(h.output_dim(l - 1)));
    EXPECT_EQ(b.fine_basis.rows(), static_cast<Eigen::Index>(h.output_dim(l)));
    // With delta = 0, q_l = A_l g and q_{l-1} = A_{l-1} g, so the reconstruction is exact.
    const auto& s = mp.pilot.samples[l];
    for (std::size_t i = 0; i < 10; ++i) {
      const double z = b.sample_Z(h, s.coarse_q[i]);
      EXPECT_NEAR(z, s.y(i), 1e-12);
    }
    EXPECT_NEAR(mp.cv[l].rho2, 1.0, 1e-12);
    EXPECT_EQ(mp.cv[l].n_samples, 55u);
  }
}

TEST(ReducedBasis, SelectedColumnsComeFromPilot) {
  const models::SyntheticLowRank h(models::SyntheticParams{});
  const auto mp = prepared(h, 40, 4, 5);
  const auto& b = *mp.bases[2];
  const auto& s = mp.pilot.samples[2];
  for (std::size_t k = 0; k < b.rank; ++k) {
    EXPECT_EQ(b.coarse_basis.col(static_cast<Eigen::Index>(k)), s.coarse_q[b.selected[k]]);
    EXPECT_EQ(b.fine_basis.col(static_cast<Eigen::Index>(k)), h.evaluate(2, s.inputs[b.selected[k]]).q);
  }
}

TEST(ReducedBasis, Errors) {
  const models::SyntheticLowRank h(models::SyntheticParams{});
  const auto pilot = mlmc::pilot_mlmc(h, 4, 1);
  EXPECT_THROW(build_reduced_basis(h, 1, pilot.samples[1], linalg::Termination::fixed(5)), ConfigError);
  EXPECT_THROW(build_reduced_basis(h, 0, pilot.samples[0], linalg::Termination::fixed(1)), DimensionError);
  const auto none = build_reduced_basis(h, 1, pilot.samples[1], linalg::Termination::tol(1e6));
  EXPECT_FALSE(none.has_value());
  EXPECT_THROW(allocate_zbar(0.5, 0.0), DataError);
}

TEST(RunMlcv, ForcedOffMatchesMlmcExceptBasisCost) {
  const models::SyntheticLowRank h(models::SyntheticParams{});
  const auto mp = prepared(h, 50, 6, 5);
  const double eps = 0.005;
  const auto plan = plan_mlcv(mp, eps, true);
  const auto mlmc_plan = mlmc::allocate_mlmc(mp.pilot.stats, eps);
  EXPECT_EQ(plan.tilde.n, mlmc_plan.n);
  const auto a = run_mlcv(h, mp, plan, 6);
  const auto b = mlmc::run_mlmc(h, mlmc_plan, 6, mp.pilot);
  EXPECT_EQ(a.estimate, b.estimate);
  double basis_cost = 0.0;
  for (std::size_t l = 1; l < 3; ++l) basis_cost += 5.0 * (h.unit_cost(l) + h.unit_cost(l - 1));
  EXPECT_EQ(a.cost - b.cost, basis_cost);
}

TEST(RunMlcv, CostIdentityAndMseIdentity) {
  const models::SyntheticLowRank h(models::SyntheticParams{});
  const auto mp = prepared(h, 100, 8, 5);
  const auto plan = plan_mlcv(mp, 0.002);
  const auto r = run_mlcv(h, mp, plan, 8);
  EXPECT_EQ(r.cost, logged_cost(r));
  double cost = static_cast<double>(r.levels[0].n_used) * h.unit_cost(0);
  double err = 0.0;
  for (const auto& lr : r.levels) {
    err += lr.var_y / static_cast<double>(lr.n_used) * lr.mserf;
    if (lr.level == 0) continue;
    EXPECT_TRUE(lr.cv_enabled);
    EXPECT_EQ(lr.n_basis, 5u);
    EXPECT_EQ(lr.n_used, std::max<std::size_t>(lr.planned, 95));
    cost += static_cast<double>(lr.n_used + 5) * (h.unit_cost(lr.level) + h.unit_cost(lr.level - 1));
  }
  for (const auto& lr : r.levels) cost += static_cast<double>(lr.n_prime) * lr.coarse_cost;
  EXPECT_EQ(r.cost, cost);
  EXPECT_DOUBLE_EQ(r.sampling_error, err);
}

TEST(RunMlcv, ThreadInvariant) {
  const models::SyntheticLowRank h(models::SyntheticParams{});
  const auto mp = prepared(h, 30, 10, 5);
  const auto plan = plan_mlcv(mp, 0.003);
  EXPECT_EQ(run_mlcv(h, mp, plan, 10, {1}).estimate, run_mlcv(h, mp, plan, 10, {6}).estimate);
}

TEST(RunMlcv, PlanCostFormula) {
  const models::SyntheticLowRank h(models::SyntheticParams{});
  const auto mp = prepared(h, 60, 12, 5);
  const auto plan = plan_mlcv(mp, 0.01);
  double c = static_cast<double>(plan.tilde.n[0]) * 16.0;
  for (std::size_t l = 1; l < 3; ++l) {
    c += static_cast<double>(plan.tilde.n[l] + 5) * (h.unit_cost(l) + h.unit_cost(l - 1));
    c += static_cast<double>(plan.n_prime[l]) * h.unit_cost(l - 1);
    EXPECT_NEAR(plan.ratio[l] * plan.multiplier[l], 1.0, 1e-15);
  }
  EXPECT_EQ(plan.cost(), c);
}

TEST(RelativeError, Curves) {
  const std::vector<double> partial{1.0, 0.5, 0.25};
  const auto e = relative_error_curves(partial, 1.75);
  EXPECT_NEAR(e[0], 0.75 / 1.75, 1e-15);
  EXPECT_EQ(e[2], 0.0);
  EXPECT_NEAR(relative_error_curves(std::vector<double>{2.0}, 4.0)[0], 0.5, 0.0);
  EXPECT_THROW(relative_error_curves(partial, 0.0), DataError);
}

TEST(BasisCache, RoundTripIsExact) {
  const models::SyntheticLowRank h(models::SyntheticParams{});
  const auto mp = prepared(h, 30, 14, 5);
  const auto dir = std::filesystem::temp_directory_path() / "lrcv_basis_cache_test";
  std::filesystem::remove_all(dir);
  const BasisKey key{"abc", 2, 14, 30, "rank=5"};
  save_basis(dir / "level_2.json", key, mp.bases[2]);
  const auto loaded = load_basis(dir / "level_2.json", key);
  ASSERT_TRUE(loaded.found);
  ASSERT_TRUE(loaded.basis.has_value());
  EXPECT_EQ(loaded.basis->coarse_basis, mp.bases[2]->coarse_basis);
  EXPECT_EQ(loaded.basis->fine_basis, mp.bases[2]->fine_basis);
  EXPECT_EQ(loaded.basis->selected, mp.bases[2]->selected);
  EXPECT_EQ(loaded.basis->id_residual, mp.bases[2]->id_residual);

  BasisKey other = key;
  other.seed = 15;
  EXPECT_FALSE(load_basis(dir / "level_2.json", other).found);
  EXPECT_FALSE(load_basis(dir / "missing.json", key).found);

  save_basis(dir / "level_1.json", {"abc", 1, 14, 30, "tol=1"}, std::nullopt);
  const auto empty = load_basis(dir / "level_1.json", {"abc", 1, 14, 30, "tol=1"});
  EXPECT_TRUE(empty.found);
  EXPECT_FALSE(empty.basis.has_value());
  std::filesystem::remove_all(dir);
}
