// Serial reference kernels against their OpenMP versions.
//
//   build/bench/bench_kernels --benchmark_filter=Assign

#include <benchmark/benchmark.h>

#include <vector>

#include "meterwatch/kernels.hpp"
#include "meterwatch/profile_analytics.hpp"
#include "meterwatch/rng.hpp"

using namespace meterwatch;

namespace {

constexpr std::size_t kDim = 96;
constexpr std::size_t kK = 6;

struct Data {
  std::vector<double> points, centroids;
  std::vector<int> labels;
  std::vector<double> dist2;
};

Data make(std::size_t n) {
  Rng rng(n);
  Data d;
  d.points.resize(n * kDim);
  for (auto& v : d.points) v = rng.uniform(0, 3000);
  d.centroids.assign(d.points.begin(), d.points.begin() + std::ptrdiff_t(kK * kDim));
  d.labels.assign(n, 0);
  d.dist2.assign(n, 0.0);
  return d;
}

void Assign(benchmark::State& state, kernels::Exec exec) {
  const auto n = std::size_t(state.range(0));
  auto d = make(n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::assign(exec, d.points, d.centroids, {n, kDim, kK}, d.labels, d.dist2));
  }
  state.SetItemsProcessed(std::int64_t(state.iterations() * n));
}

void Update(benchmark::State& state, kernels::Exec exec) {
  const auto n = std::size_t(state.range(0));
  auto d = make(n);
  kernels::assign_serial(d.points, d.centroids, {n, kDim, kK}, d.labels, d.dist2);
  std::vector<std::size_t> counts(kK);
  for (auto _ : state) {
    kernels::update(exec, d.points, d.labels, {n, kDim, kK}, d.centroids, counts);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(std::int64_t(state.iterations() * n));
}

void KMeans(benchmark::State& state, kernels::Exec exec) {
  const auto n = std::size_t(state.range(0));
  const auto d = make(n);
  analytics::KMeansOptions opt;
  opt.k = 3;
  opt.seed = 1;
  opt.restarts = 10;
  opt.exec = exec;
  for (auto _ : state) {
    benchmark::DoNotOptimize(analytics::kmeans_points(d.points, n, kDim, opt));
  }
}

}  // namespace

BENCHMARK_CAPTURE(Assign, serial, kernels::Exec::serial)->Arg(30)->Arg(1000)->Arg(20000);
BENCHMARK_CAPTURE(Assign, openmp, kernels::Exec::openmp)->Arg(30)->Arg(1000)->Arg(20000);
BENCHMARK_CAPTURE(Update, serial, kernels::Exec::serial)->Arg(30)->Arg(1000)->Arg(20000);
BENCHMARK_CAPTURE(Update, openmp, kernels::Exec::openmp)->Arg(30)->Arg(1000)->Arg(20000);
BENCHMARK_CAPTURE(KMeans, serial, kernels::Exec::serial)->Arg(30)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(KMeans, openmp, kernels::Exec::openmp)->Arg(30)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
