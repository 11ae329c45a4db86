#include <benchmark/benchmark.h>

#include "sprx/trainer.hpp"

using namespace sprx;

namespace {

ModelConfig config_for(const benchmark::State& state) {
  ModelConfig c;
  c.variant = state.range(0) == 0 ? Variant::Neural : Variant::Spiking;
  c.time_steps = static_cast<std::size_t>(std::max<std::int64_t>(1, state.range(0)));
  return c;
}

void model_forward(benchmark::State& state) {
  const ModelConfig c = config_for(state);
  GridConfig g;
  Rng rng(1);
  const ParamSet p = init_params(c, rng);
  const Batch batch = generate_batch(g, LinkRanges{}, 16, rng);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(forward(c, p, g, batch.input));
  state.SetItemsProcessed(state.iterations() * 16);
}

void train_step(benchmark::State& state) {
  TrainConfig t;
  t.steps = 1'000'000;
  Trainer trainer(config_for(state), t);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step());
}

}  // namespace

// Argument: time steps of the spiking variant; 0 selects the neural variant.
BENCHMARK(model_forward)->Arg(0)->Arg(1)->Arg(2)->Arg(10)->Unit(benchmark::kMillisecond);
BENCHMARK(train_step)->Arg(0)->Arg(2)->Unit(benchmark::kMillisecond);
