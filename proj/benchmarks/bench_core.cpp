#include <benchmark/benchmark.h>

#include "stratmc/analysis.hpp"
#include "stratmc/harness.hpp"
#include "stratmc/estimators.hpp"
#include "stratmc/integrand.hpp"

namespace {

using namespace stratmc;

void BM_CrudeMc(benchmark::State& state) {
  const auto& f = corpus_function("oscillator1d");
  const auto n = state.range(0);
  std::uint64_t rep = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(crude_mc(f, n, {1, rep++}).estimate);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_CrudeMc)->Arg(1024)->Arg(16384);

void BM_UniformStratified(benchmark::State& state) {
  const auto& f = corpus_function("oscillator1d");
  const auto n = state.range(0);
  std::uint64_t rep = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(uniform_stratified(f, n, {1, rep++}).estimate);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_UniformStratified)->Arg(1024)->Arg(16384);

void BM_LmcUcb(benchmark::State& state) {
  const auto& f = corpus_function("oscillator1d");
  LmcUcbConfig cfg;
  cfg.budget = state.range(0);
  cfg.strata = KPolicy{}.strata_for(cfg.budget, 1);
  cfg.grad_bound = *f.grad_bound;
  std::uint64_t rep = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lmc_ucb(f, cfg, {1, rep++}).estimate);
  }
  state.SetItemsProcessed(state.iterations() * cfg.budget);
}
BENCHMARK(BM_LmcUcb)->Arg(1024)->Arg(16384);

void BM_OracleConstant(benchmark::State& state) {
  const auto& f = corpus_function("oscillator1d");
  const auto grid = QuadratureGrid::for_integrand(f, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(sigma_big(f, grid));
  }
}
BENCHMARK(BM_OracleConstant)->Arg(1024)->Arg(4096);

void BM_Allocate(benchmark::State& state) {
  const std::int64_t strata = state.range(0);
  LmcUcbConfig cfg;
  cfg.strata = strata;
  cfg.budget = 64 * strata;
  cfg.grad_bound = 1.0;
  const std::int64_t init = sbar(cfg.budget, strata, 1);
  std::vector<double> sigma_hat(static_cast<std::size_t>(strata));
  for (std::size_t k = 0; k < sigma_hat.size(); ++k) {
    sigma_hat[k] = 0.01 * static_cast<double>(k % 17);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(allocate(sigma_hat, cfg, init, 1).substrata[0]);
  }
}
BENCHMARK(BM_Allocate)->Arg(64)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
