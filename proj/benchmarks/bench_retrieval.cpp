#include <benchmark/benchmark.h>

#include <cstdio>
#include <vector>

#include "tsr/baselines.hpp"
#include "tsr/encoders.hpp"
#include "tsr/features.hpp"
#include "tsr/index.hpp"
#include "tsr/pipeline.hpp"
#include "tsr/random.hpp"
#include "tsr/synthgen.hpp"

using namespace tsr;

namespace {

std::vector<Series> corpus(std::size_t n) {
  std::vector<Series> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    GenParams p;
    p.kappa = 0.01;
    p.sigma = 0.3 + static_cast<double>(i % 7) * 0.4;
    p.trend = static_cast<double>(i % 5) * 0.3 - 0.6;
    p.seed = derive_seed(3, i);
    Series s = minmax_normalize(generate(p));
    char id[32];
    std::snprintf(id, sizeof id, "b%07zu", i);
    s.id = id;
    out.push_back(std::move(s));
  }
  return out;
}

const SketchModels& models() {
  static const SketchModels m{make_autoencoder({}, 1), make_autoencoder({}, 2), {}};
  return m;
}

void BM_CombinedEmbedding(benchmark::State& state) {
  const auto s = corpus(1);
  for (auto _ : state) benchmark::DoNotOptimize(combined_embedding(models(), s[0]));
}
BENCHMARK(BM_CombinedEmbedding);

void BM_IndexQuery(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto series = corpus(n);
  const VectorIndex index = build_sketch_index(models(), series);
  const nn::Vector q = combined_embedding(models(), series[n / 2]);
  for (auto _ : state) {
    benchmark::DoNotOptimize(index.query(std::span<const double>(q.data(), 32), 5));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_IndexQuery)->RangeMultiplier(10)->Range(1000, 100000)->Complexity();

void BM_BruteForce(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto series = corpus(n);
  const auto db = RawDatabase::from_series(series, 30);
  for (auto _ : state) benchmark::DoNotOptimize(bf_search(db, series[n / 2], 5));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BruteForce)->RangeMultiplier(10)->Range(1000, 100000)->Complexity();

void BM_BruteForceAvg(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto series = corpus(n);
  const auto db = RawDatabase::from_series(series, 30);
  const auto vol = volatility_series(series[n / 2]);
  for (auto _ : state) benchmark::DoNotOptimize(bf_avg_search(db, series[n / 2], vol, 5));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BruteForceAvg)->RangeMultiplier(10)->Range(1000, 100000)->Complexity();

}  // namespace

BENCHMARK_MAIN();
