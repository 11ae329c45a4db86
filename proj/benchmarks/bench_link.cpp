#include <benchmark/benchmark.h>

#include "sprx/baseline.hpp"
#include "sprx/dataset.hpp"

using namespace sprx;

namespace {

void draw_slots(benchmark::State& state) {
  GridConfig g;
  LinkRanges r;
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(draw_slot(g, r, rng));
}

void ls_receiver_slot(benchmark::State& state) {
  GridConfig g;
  Rng rng(2);
  const SlotSample s = draw_slot(g, LinkRanges{}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(ls_receiver(s.received, s.noise_var, g));
}

}  // namespace

BENCHMARK(draw_slots)->Unit(benchmark::kMicrosecond);
BENCHMARK(ls_receiver_slot)->Unit(benchmark::kMicrosecond);
