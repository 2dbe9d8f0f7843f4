// Serial reference vs OpenMP kernel for each parallel hot spot.
#include <benchmark/benchmark.h>

#include "anomshap/bench.hpp"
#include "anomshap/gmm.hpp"

using namespace anomshap;

namespace {

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

GmmModel fixture_gmm(std::size_t d) {
  Matrix c = Matrix::Constant(d, d, 0.5);
  c.diagonal().setOnes();
  return GmmModel({0.3, 0.7}, {Vector::Constant(d, 1.5), Vector::Constant(d, -1.5)}, {c, 2.0 * c});
}

Vector query(std::size_t d) {
  Vector x = Vector::LinSpaced(static_cast<Eigen::Index>(d), -1.0, 2.0);
  x(0) = 3.5;
  return x;
}

void BM_CoalitionEval(benchmark::State& state) {
  const std::size_t d = 12;
  auto e = fixture_gmm(d);
  AshCharFn v(e, ash_prepare(e, query(d), 0.01));
  const auto coalitions = sample_subsets(SubsetSampler(d, default_sample_count(d), 1));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_coalitions(v, coalitions, mode(state)));
}

void BM_AshAnchors(benchmark::State& state) {
  const std::size_t d = 16;
  auto e = fixture_gmm(d);
  const Vector x = query(d);
  for (auto _ : state) benchmark::DoNotOptimize(ash_prepare(e, x, 0.01, {}, mode(state)));
}

void BM_GmmEStep(benchmark::State& state) {
  const std::size_t d = 8;
  auto e = fixture_gmm(d);
  const Matrix rows = generate_synthetic_gaussian(d, 0.5, 20000, 3).rows();
  Matrix resp;
  for (auto _ : state) benchmark::DoNotOptimize(gmm_e_step(e, rows, resp, mode(state)));
}

void BM_IntegratedGradients(benchmark::State& state) {
  const std::size_t d = 32;
  auto e = fixture_gmm(d);
  const Vector x = query(d);
  const Vector r = Vector::Zero(static_cast<Eigen::Index>(d));
  for (auto _ : state) benchmark::DoNotOptimize(integrated_gradients(e, x, r, 512, mode(state)));
}

void BM_BenchTrials(benchmark::State& state) {
  auto data = generate_synthetic_gaussian(6, 0.9, 1000, 5);
  auto splits = normalize(DataSplits{data, data, data, data, std::nullopt});
  auto e = fit_gmm(splits.train, {.components = 2, .seed = 1}).model;
  const Strategy strategies[] = {Strategy::ash};
  BenchConfig cfg;
  cfg.n_trials = 16;
  cfg.execution = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(run_synth_benchmark(splits, e, strategies, cfg));
}

}  // namespace

BENCHMARK(BM_CoalitionEval)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AshAnchors)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GmmEStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IntegratedGradients)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BenchTrials)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
