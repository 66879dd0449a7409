#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "leakaudit/protection.hpp"

using namespace leakaudit;

namespace {

std::vector<AttackExample> random_examples(int count, int num_items) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> item(0, num_items - 1);
  std::vector<AttackExample> out(static_cast<std::size_t>(count));
  for (int e = 0; e < count; ++e) {
    auto& ex = out[static_cast<std::size_t>(e)];
    ex.user = "u" + std::to_string(e % 50);
    for (int m = 0; m < 5; ++m) ex.behavior.items.push_back(item(rng));
    for (int n = 0; n < 10; ++n) ex.exposure.items.push_back(item(rng));
  }
  return out;
}

// Args: selection, replacement. Protects 2000 slates at L = 0.4.
void BM_ProtectExamples(benchmark::State& state) {
  const int items = 500;
  const auto examples = random_examples(2000, items);
  ProtectionOptions options;
  options.popularity = PopularityModel::from_impressions(examples, items);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd table(items, 64);
  for (Eigen::Index i = 0; i < table.size(); ++i) table.data()[i] = normal(rng);
  const EmbeddingProvider embeddings(table, "random");
  const auto selection = static_cast<SelectionKind>(state.range(0));
  const auto replacement = static_cast<ReplacementKind>(state.range(1));
  for (auto _ : state)
    benchmark::DoNotOptimize(protect_examples(examples, selection, replacement, 0.4, 1, items,
                                              options.batch_size, options, &embeddings));
  state.SetItemsProcessed(state.iterations() * 2000);
}
BENCHMARK(BM_ProtectExamples)->ArgsProduct({{0, 1}, {0, 1, 2}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
