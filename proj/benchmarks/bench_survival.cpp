#include <benchmark/benchmark.h>

#include <cmath>

#include "fleetsurv/explain.hpp"
#include "fleetsurv/rng.hpp"
#include "fleetsurv/survival/cox.hpp"
#include "fleetsurv/survival/kaplan_meier.hpp"
#include "fleetsurv/survival/mtlr.hpp"

namespace {

using namespace fleetsurv;

SurvivalDataset exponential_data(std::size_t n, Eigen::Index d, std::uint64_t seed) {
  auto rng = make_rng(seed);
  SurvivalDataset data;
  for (Eigen::Index j = 0; j < d; ++j) data.feature_names.push_back("x" + std::to_string(j));
  data.x.resize(static_cast<Eigen::Index>(n), d);
  data.duration.resize(static_cast<Eigen::Index>(n));
  data.event.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    double eta = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      data.x(r, j) = standard_normal(rng);
      eta += 0.3 * data.x(r, j);
    }
    data.duration[r] = std::ceil(-std::log(1.0 - uniform01(rng)) * 30.0 * std::exp(-eta));
    data.event[i] = uniform01(rng) < 0.85 ? 1 : 0;
  }
  return data;
}

void BM_KaplanMeier(benchmark::State& state) {
  const auto data = exponential_data(static_cast<std::size_t>(state.range(0)), 1, 1);
  const std::vector<double> d(data.duration.data(), data.duration.data() + data.duration.size());
  for (auto _ : state) benchmark::DoNotOptimize(survival::kaplan_meier(d, data.event));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KaplanMeier)->RangeMultiplier(4)->Range(256, 65536)->Complexity();

void BM_CoxFit(benchmark::State& state) {
  const auto data = exponential_data(static_cast<std::size_t>(state.range(0)), 9, 2);
  for (auto _ : state) benchmark::DoNotOptimize(survival::fit_cox(data));
}
BENCHMARK(BM_CoxFit)->Arg(1000)->Arg(6000)->Unit(benchmark::kMillisecond);

void BM_MtlrEpochs(benchmark::State& state) {
  const auto data = exponential_data(4000, 9, 3);
  survival::MtlrConfig cfg;
  cfg.epochs = 10;
  cfg.intervals = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(survival::fit_mtlr(data, cfg));
}
BENCHMARK(BM_MtlrEpochs)->Arg(50)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_KernelShapExact(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  const auto data = exponential_data(500, d, 4);
  const auto model = survival::fit_cox(data);
  const auto f = explain::point_predictor(model);
  const auto background = explain::kmeans_background(data.x, 50, 1);
  const std::vector<double> x(data.x.row(0).begin(), data.x.row(0).end());
  for (auto _ : state) benchmark::DoNotOptimize(explain::kernel_shap(f, x, background));
}
BENCHMARK(BM_KernelShapExact)->Arg(6)->Arg(9)->Unit(benchmark::kMillisecond);

}  // namespace
