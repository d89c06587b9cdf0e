// Serial vs OpenMP kernels: dense affine layer and batch scoring.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "eat/datasets.hpp"
#include "eat/kernels.hpp"
#include "eat/model.hpp"

namespace {

using eat::kernels::Execution;

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

void affine(benchmark::State& state, Execution exec) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 64, h = 128;
  auto x = random_values(n * d, 1);
  auto w = random_values(d * h, 2);
  auto b = random_values(h, 3);
  std::vector<double> out(n * h);
  for (auto _ : state) {
    eat::kernels::affine(exec, {x, n, d}, {w, d, h}, b, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(n));
}

void scoring(benchmark::State& state, Execution exec) {
  eat::LongTailSpec spec;
  spec.imbalance_ratio = 1.0;
  spec.head_count = static_cast<std::size_t>(state.range(0)) / spec.num_classes;
  const auto samples = eat::gen_longtail(spec);
  eat::Architecture arch;
  arch.input_dim = spec.input_dim;
  arch.hidden_dim = 64;
  const auto params = eat::init_params(arch, 7);
  for (auto _ : state) {
    auto records = eat::score_samples(params, samples, false, eat::Detector::ensemble, exec);
    benchmark::DoNotOptimize(records.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(samples.size()));
}

}  // namespace

BENCHMARK_CAPTURE(affine, serial, Execution::serial)->Arg(256)->Arg(4096);
BENCHMARK_CAPTURE(affine, parallel, Execution::parallel)->Arg(256)->Arg(4096);
BENCHMARK_CAPTURE(scoring, serial, Execution::serial)->Arg(1000)->Arg(10000);
BENCHMARK_CAPTURE(scoring, parallel, Execution::parallel)->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
