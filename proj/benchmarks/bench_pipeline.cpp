#include <benchmark/benchmark.h>

#include "fleetsurv/simgen.hpp"

namespace {

using namespace fleetsurv;

void BM_SimulateFleet(benchmark::State& state) {
  auto cfg = sim::SimConfig::defaults();
  cfg.mechanical.bikes = static_cast<std::size_t>(state.range(0));
  cfg.electric.bikes = static_cast<std::size_t>(state.range(0));
  cfg.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(sim::simulate_fleet(cfg));
}
BENCHMARK(BM_SimulateFleet)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
