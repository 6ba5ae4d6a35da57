#include <benchmark/benchmark.h>

#include "ltnn/training.hpp"

namespace {

using namespace ltnn;

// One generator + discriminator update of the default 64x64 model.
void BM_TrainStep(benchmark::State& state) {
  DatasetConfig dc;
  dc.objects = 10;
  dc.conditions = 3;
  const auto data = generate_dataset(dc);
  TrainConfig tc;
  tc.model.conditions = 3;
  tc.model.conditioning = state.range(1) ? Conditioning::kChannelConcat : Conditioning::kCtu;
  Trainer trainer(tc);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < std::size_t(state.range(0)); ++i) idx.push_back(i % data.train.size());
  const Batch batch = load_batch(data.train, idx);
  int k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(trainer.train_step(batch, k));
    k = (k + 1) % 3;
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Args({8, 0})->Args({8, 1})->Unit(benchmark::kMillisecond);

void BM_Inference(benchmark::State& state) {
  const LtnnModel model(ModelConfig{}, 1);
  std::vector<Real> v(std::size_t(state.range(0)) * 3 * 64 * 64, 0.5);
  const Tensor x = Tensor::from({std::size_t(state.range(0)), 3, 64, 64}, v);
  NoGradScope no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(x, 1).image);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Inference)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace
