#include <random>

#include <benchmark/benchmark.h>

#include "tpnet/transforms.hpp"

namespace {

using tpnet::Tensor;
using tpnet::transforms::TransformKind;

Tensor random_planes(std::size_t channels, std::size_t n) {
  Tensor x({channels, n, n});
  std::mt19937_64 rng(7);
  std::normal_distribution<float> dist;
  for (auto& v : x.values()) v = dist(rng);
  return x;
}

void transform_2d(benchmark::State& state, TransformKind kind) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_planes(16, n);
  for (auto _ : state) {
    auto y = tpnet::transforms::transform2d(x, kind, false);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * 16);
}

void matrix_2d(benchmark::State& state, TransformKind kind) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_planes(16, n);
  for (auto _ : state) {
    auto y = tpnet::transforms::matrix_oracle2d(x, kind, false);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * 16);
}

}  // namespace

BENCHMARK_CAPTURE(transform_2d, dct, TransformKind::DCT)->RangeMultiplier(2)->Range(8, 32);
BENCHMARK_CAPTURE(transform_2d, ht, TransformKind::HT)->RangeMultiplier(2)->Range(8, 32);
BENCHMARK_CAPTURE(transform_2d, bwt, TransformKind::BWT)->RangeMultiplier(2)->Range(8, 32);
BENCHMARK_CAPTURE(matrix_2d, dct, TransformKind::DCT)->RangeMultiplier(2)->Range(8, 32);
