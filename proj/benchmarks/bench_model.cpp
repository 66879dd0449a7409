#include <benchmark/benchmark.h>

#include <random>
#include <span>
#include <vector>

#include "leakaudit/model.hpp"

using namespace leakaudit;

namespace {

std::vector<AttackExample> random_batch(int size, int num_items, int M, int N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> item(0, num_items - 1);
  std::vector<AttackExample> out(static_cast<std::size_t>(size));
  for (auto& ex : out) {
    for (int m = 0; m < M; ++m) ex.behavior.items.push_back(item(rng));
    for (int n = 0; n < N; ++n) ex.exposure.items.push_back(item(rng));
  }
  return out;
}

ModelSpec spec_for(int encoder, int decoder, int d) {
  ModelSpec spec;
  spec.encoder = static_cast<EncoderKind>(encoder);
  spec.decoder = static_cast<DecoderKind>(decoder);
  spec.num_items = 500;
  spec.M = 5;
  spec.N = 10;
  spec.d = d;
  return spec;
}

// Args: encoder, decoder, d. One forward and backward pass over 64 examples.
void BM_LossAndGradient(benchmark::State& state) {
  AttackModel model(spec_for(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)),
                             static_cast<int>(state.range(2))), 1);
  const auto examples = random_batch(64, 500, 5, 10, 2);
  const Batch batch = Batch::from(std::span<const AttackExample>(examples), 5, 10);
  for (auto _ : state) {
    model.parameters().zero_grad();
    auto loss = model.loss(batch, ForwardContext{});
    loss.backward();
    benchmark::DoNotOptimize(loss.value()(0, 0));
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_LossAndGradient)
    ->ArgsProduct({{0, 2}, {0, 1, 3}, {32, 128}})
    ->Unit(benchmark::kMillisecond);

void BM_Inference(benchmark::State& state) {
  const AttackModel model(spec_for(2, static_cast<int>(state.range(0)), 128), 1);
  const auto examples = random_batch(64, 500, 5, 10, 3);
  std::vector<int> slates;
  for (const auto& ex : examples) slates.insert(slates.end(), ex.exposure.items.begin(), ex.exposure.items.end());
  for (auto _ : state) benchmark::DoNotOptimize(model.infer(slates));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_Inference)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
