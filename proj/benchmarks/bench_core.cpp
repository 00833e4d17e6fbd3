#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "lrcv/diffusion.hpp"
#include "lrcv/linalg.hpp"
#include "lrcv/mlcv.hpp"
#include "lrcv/mlmc.hpp"
#include "lrcv/synthetic.hpp"

using namespace lrcv;

namespace {

Eigen::MatrixXd decaying_matrix(Eigen::Index m, Eigen::Index n) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(m, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) a(i, j) = g(gen) * std::pow(0.7, static_cast<double>(i));
  return a;
}

void BM_InterpolativeDecomposition(benchmark::State& state) {
  const auto m = state.range(0);
  const Eigen::MatrixXd u = decaying_matrix(m, 200);
  for (auto _ : state) {
    benchmark::DoNotOptimize(linalg::interpolative_decomposition(u, linalg::Termination::fixed(10)));
  }
}
BENCHMARK(BM_InterpolativeDecomposition)->Arg(16)->Arg(64)->Arg(256);

void BM_LeastSquaresSolve(benchmark::State& state) {
  const Eigen::MatrixXd basis = decaying_matrix(state.range(0), 10);
  const linalg::LeastSquaresSolver solver(basis);
  const Eigen::VectorXd q = basis.col(3) + 0.5 * basis.col(7);
  for (auto _ : state) benchmark::DoNotOptimize(solver.solve(q));
}
BENCHMARK(BM_LeastSquaresSolve)->Arg(43)->Arg(175)->Arg(703);

void BM_DiffusionSolve(benchmark::State& state) {
  models::DiffusionParams p;
  p.base_cells = 11;
  p.refinement = 4;
  p.levels = 4;
  const models::Diffusion1D h(p);
  const auto level = static_cast<std::size_t>(state.range(0));
  const auto xi = rng::draw_input({1, rng::Purpose::oracle(), 0}, h.inputs());
  for (auto _ : state) benchmark::DoNotOptimize(h.evaluate(level, xi));
  state.counters["dof"] = static_cast<double>(h.dof(level));
}
BENCHMARK(BM_DiffusionSolve)->DenseRange(0, 3);

void BM_AllocateMlmc(benchmark::State& state) {
  std::vector<double> v, c;
  for (int l = 0; l < state.range(0); ++l) {
    v.push_back(std::pow(0.25, l));
    c.push_back(std::pow(4.0, l));
  }
  for (auto _ : state) benchmark::DoNotOptimize(mlmc::allocate_mlmc(v, c, 1e-3));
}
BENCHMARK(BM_AllocateMlmc)->Arg(3)->Arg(8);

void BM_SyntheticPilotAndBasis(benchmark::State& state) {
  const models::SyntheticLowRank h(models::SyntheticParams{});
  const std::vector<linalg::Termination> terms(2, linalg::Termination::fixed(5));
  for (auto _ : state) {
    auto pilot = mlmc::pilot_mlmc(h, static_cast<std::size_t>(state.range(0)), 3);
    benchmark::DoNotOptimize(mlcv::prepare_mlcv(h, std::move(pilot), terms));
  }
}
BENCHMARK(BM_SyntheticPilotAndBasis)->Arg(100)->Arg(400);

}  // namespace

BENCHMARK_MAIN();
