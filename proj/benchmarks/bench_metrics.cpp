#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "leakaudit/metrics.hpp"

using namespace leakaudit;

namespace {

RankedInference random_inference(bool sequencewise, int num_items, int M, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RankedInference r;
  r.mode = sequencewise ? RankedInference::Mode::Sequencewise : RankedInference::Mode::Pointwise;
  for (int m = 0; m < (sequencewise ? M : 1); ++m) {
    Eigen::VectorXd s(num_items);
    for (int i = 0; i < num_items; ++i) s(i) = u(rng);
    r.scores.push_back(s);
  }
  return r;
}

// Args: sequence-wise flag, |I|.
void BM_ScoreExample(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const int items = static_cast<int>(state.range(1));
  const RankedInference inf = random_inference(state.range(0) != 0, items, 5, rng);
  const std::vector<int> behavior{3, 17, 42, 8, 99};
  const std::vector<int> ks{5, 10, 20};
  for (auto _ : state) benchmark::DoNotOptimize(score_example(inf, behavior, ks, MrrMode::PerItem));
}
BENCHMARK(BM_ScoreExample)->ArgsProduct({{0, 1}, {500, 20000}});

}  // namespace

BENCHMARK_MAIN();
