#include <benchmark/benchmark.h>

#include "sprx/ofdm.hpp"
#include "sprx/ops.hpp"

using namespace sprx;

namespace {

Tensor filled(Shape shape, std::uint64_t seed, bool grad = false) {
  Rng rng(seed);
  std::uniform_real_distribution<float> u(-1, 1);
  std::vector<real> v(numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v), grad);
}

void conv_forward(benchmark::State& state) {
  const std::size_t c = static_cast<std::size_t>(state.range(0));
  const Tensor x = filled({16, c, 14, 24}, 1), k = filled({c, c, 3, 3}, 2), b = filled({c}, 3);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k, b));
  state.SetItemsProcessed(state.iterations() * 16 * 9 * c * c * 14 * 24);
}

void conv_backward(benchmark::State& state) {
  const std::size_t c = static_cast<std::size_t>(state.range(0));
  const Tensor x = filled({16, c, 14, 24}, 1, true), k = filled({c, c, 3, 3}, 2, true), b = filled({c}, 3, true);
  for (auto _ : state) {
    backward(sum_all(conv2d(x, k, b)));
    benchmark::ClobberMemory();
  }
}

void layer_norm_forward(benchmark::State& state) {
  const Tensor x = filled({16, 16, 14, 24}, 4), g = filled({16}, 5), s = filled({16}, 6);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(layer_norm(x, g, s));
}

}  // namespace

BENCHMARK(conv_forward)->Arg(4)->Arg(16)->Arg(32)->Unit(benchmark::kMicrosecond);
BENCHMARK(conv_backward)->Arg(16)->Unit(benchmark::kMicrosecond);
BENCHMARK(layer_norm_forward)->Unit(benchmark::kMicrosecond);
