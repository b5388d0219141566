#include <benchmark/benchmark.h>

#include "gdpen/certification.hpp"
#include "gdpen/experiment.hpp"

using namespace gdpen;

namespace {

PhaseConfig small_lasso() {
  PhaseConfig cfg;
  cfg.family = Family::Lasso;
  cfg.sizes = {32};
  cfg.n_grid = {60, 120};
  cfg.trials = 8;
  cfg.lambda_rule = LambdaRule::Theory;
  cfg.master_seed = 7;
  return cfg;
}

void BM_PhaseLasso(benchmark::State& state) {
  const PhaseConfig cfg = small_lasso();
  const Execution mode = state.range(0) ? Execution::Parallel : Execution::Serial;
  for (auto _ : state) benchmark::DoNotOptimize(run_phase(cfg, mode));
  state.SetLabel(state.range(0) ? "parallel" : "serial");
}
BENCHMARK(BM_PhaseLasso)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Converse(benchmark::State& state) {
  Matrix q(3, 3);
  q << 1, 0, 0.6, 0, 1, 0.6, 0.6, 0.6, 1;
  Vector ts(3);
  ts << 1, 1, 0;
  const Penalty rho = make_lasso(3, {0, 1});
  ConverseOptions opts;
  opts.trials = 40;
  opts.grid_points = 6;
  opts.parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(converse_check(rho, q, ts, opts));
  state.SetLabel(state.range(0) ? "parallel" : "serial");
}
BENCHMARK(BM_Converse)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
