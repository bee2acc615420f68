#include <benchmark/benchmark.h>

#include <vector>

#include "tropattn/census.hpp"
#include "tropattn/experiments.hpp"
#include "tropattn/polytope.hpp"
#include "tropattn/rng.hpp"
#include "tropattn/tropical.hpp"

using namespace tropattn;

namespace {

std::vector<Vector> gaussian_cloud(std::uint64_t seed, Eigen::Index dim, std::uint64_t n) {
  const CounterRng rng(seed);
  std::vector<Vector> pts;
  for (std::uint64_t i = 0; i < n; ++i) {
    Vector v(dim);
    for (Eigen::Index j = 0; j < dim; ++j) v[j] = rng.normal(i, static_cast<std::uint64_t>(j));
    pts.push_back(v);
  }
  return pts;
}

void BM_LseAdd(benchmark::State& state) {
  const auto n = static_cast<std::uint64_t>(state.range(0));
  const CounterRng rng(1);
  std::vector<double> xs(n);
  for (std::uint64_t i = 0; i < n; ++i) xs[i] = 10.0 * rng.normal(i);
  const Temperature temp(0.1);
  for (auto _ : state) benchmark::DoNotOptimize(lse_add(xs, temp));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_LseAdd)->Arg(8)->Arg(64)->Arg(1024);

void BM_ConvexHull(benchmark::State& state) {
  const auto dim = state.range(0);
  const auto pts = gaussian_cloud(11, dim, static_cast<std::uint64_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(convex_hull(pts, dim));
}
BENCHMARK(BM_ConvexHull)->Args({2, 200})->Args({3, 200})->Args({4, 200})->Unit(benchmark::kMillisecond);

void BM_MinkowskiSum(benchmark::State& state) {
  const auto heads = static_cast<std::uint64_t>(state.range(0));
  const auto clouds = minkowski_trial_points(7, 4, heads, 6, 0);
  std::vector<Polytope> parts;
  for (const auto& c : clouds) parts.push_back(convex_hull(c, 4));
  for (auto _ : state) benchmark::DoNotOptimize(minkowski_sum(parts));
}
BENCHMARK(BM_MinkowskiSum)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_Census(benchmark::State& state) {
  const auto depth = static_cast<std::uint64_t>(state.range(0));
  const auto net = random_block_network(1337, 2, 2, 8, 4, depth);
  const auto box = Box::cube(2, -3.0, 3.0);
  constexpr std::uint64_t kSamples = 20000;
  for (auto _ : state) benchmark::DoNotOptimize(monte_carlo_census(net, box, kSamples, 5));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * kSamples));
}
BENCHMARK(BM_Census)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
