#include <random>

#include <benchmark/benchmark.h>

#include "tpnet/network.hpp"
#include "tpnet/nn.hpp"
#include "tpnet/tp_layer.hpp"

namespace {

using tpnet::Tensor;
using tpnet::nn::Mode;

Tensor random_input(std::size_t batch, std::size_t channels, std::size_t n) {
  Tensor x({batch, channels, n, n});
  std::mt19937_64 rng(11);
  std::normal_distribution<float> dist;
  for (auto& v : x.values()) v = dist(rng);
  return x;
}

// 3x3 convolution against a P-branch TP layer at the same width and size.
void conv3x3(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  tpnet::nn::Rng rng(1);
  tpnet::nn::Conv2d<float> conv(c, c, 3, 1, 1, rng);
  const Tensor x = random_input(32, c, n);
  for (auto _ : state) {
    auto y = conv.forward(x, Mode::Eval);
    benchmark::DoNotOptimize(y.data());
  }
}

void tp_layer(benchmark::State& state, tpnet::transforms::TransformKind kind) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto p = static_cast<std::size_t>(state.range(2));
  tpnet::nn::Rng rng(1);
  tpnet::tp::TPLayer<float> layer(tpnet::tp::make_tp_config(kind, c, n, n, p), rng);
  const Tensor x = random_input(32, c, n);
  for (auto _ : state) {
    auto y = layer.forward(x, Mode::Eval);
    benchmark::DoNotOptimize(y.data());
  }
}

void network_forward(benchmark::State& state, const char* variant) {
  const auto graph = tpnet::models::build_resnet20(tpnet::models::parse_variant(variant));
  tpnet::models::Network<float> net(graph, 3);
  const Tensor x = random_input(16, 3, 32);
  for (auto _ : state) {
    auto y = net.forward(x, Mode::Eval);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * 16);
}

using tpnet::transforms::TransformKind;

}  // namespace

BENCHMARK(conv3x3)->Args({16, 32})->Args({32, 16})->Args({64, 8})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(tp_layer, dct, TransformKind::DCT)
    ->Args({16, 32, 1})->Args({16, 32, 3})->Args({64, 8, 3})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(tp_layer, ht, TransformKind::HT)
    ->Args({16, 32, 1})->Args({16, 32, 3})->Args({64, 8, 3})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(tp_layer, bwt, TransformKind::BWT)
    ->Args({16, 32, 3})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(network_forward, resnet20, "resnet20")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(network_forward, 3c_dct, "3c-dct")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(network_forward, 3c_ht, "3c-ht")->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
