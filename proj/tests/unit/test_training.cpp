#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "leakaudit/autograd.hpp"
#include "leakaudit/checkpoint.hpp"
#include "leakaudit/error.hpp"
#include "leakaudit/optimizer.hpp"
#include "leakaudit/training.hpp"
#include "test_support.hpp"

using namespace leakaudit;
namespace lt = leakaudit::testing;

namespace {

TEST(Adam, MatchesScalarOracle) {
  ParameterStore store(1);
  Var p = store.add_constant("p", 1, 2, 0.0);
  p.mutable_value() << 1.5, -0.5;
  const AdamOptions opt{0.1, 0.9, 0.999, 1e-8};
  Adam adam(store, opt);
  // Loss sum(p^2): gradient 2p.
  double x[2] = {1.5, -0.5}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 25; ++t) {
    store.zero_grad();
    ag::sum(ag::mul(p, p)).backward();
    adam.step();
    for (int i = 0; i < 2; ++i) {
      const double g = 2.0 * x[i];
      m[i] = 0.9 * m[i] + 0.1 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      const double mh = m[i] / (1.0 - std::pow(0.9, t));
      const double vh = v[i] / (1.0 - std::pow(0.999, t));
      x[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    }
    EXPECT_NEAR(p.value()(0, 0), x[0], 1e-12) << t;
    EXPECT_NEAR(p.value()(0, 1), x[1], 1e-12) << t;
  }
  EXPECT_EQ(adam.steps(), 25);
}

// Slates that contain the behavior items, so the attack is learnable.
std::vector<AttackExample> planted(int count, int users, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto examples = lt::random_examples(count, 30, 2, 5, rng, users);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    examples[i].user = examples[i].behavior.user = examples[i].exposure.user =
        "s" + std::to_string(seed) + "u" + std::to_string(i % static_cast<std::size_t>(users));
    examples[i].exposure.items[0] = examples[i].behavior.items[0];
    examples[i].exposure.items[1] = examples[i].behavior.items[1];
  }
  return examples;
}

struct TinySetup {
  ModelSpec spec;
  DatasetSplit split;
  TrainOptions options;
  TinySetup() {
    spec.encoder = EncoderKind::Mean;
    spec.decoder = DecoderKind::Pointwise;
    spec.num_items = 30;
    spec.M = 2;
    spec.N = 5;
    spec.d = 16;
    spec.dropout = 0.1;
    split.train = planted(200, 20, 1);
    split.valid = planted(40, 4, 2);
    options.config.M = 2;
    options.config.N = 5;
    options.config.d = 16;
    options.config.batch_size = 32;
    options.config.learning_rate = 0.01;
    options.config.seed = 5;
    options.max_epochs = 12;
    options.patience = 12;
  }
};

TEST(Train, LearnsPlantedSignalAndKeepsBestEpoch) {
  TinySetup s;
  const TrainResult result = train(s.spec, s.split, s.options);
  ASSERT_EQ(result.log.size(), 12u);
  EXPECT_LT(result.log.back().train_loss, result.log.front().train_loss);
  double best = -1.0;
  int best_epoch = 0;
  for (const auto& e : result.log)
    if (e.valid_recall_at_10 > best) {
      best = e.valid_recall_at_10;
      best_epoch = e.epoch;
    }
  EXPECT_EQ(result.best_epoch, best_epoch);
  EXPECT_EQ(result.best_valid_recall, best);
  // Chance for k=10, M=2 over 30 items is 2/3.
  EXPECT_GT(best, 0.9);
  // The returned model is the best epoch's snapshot.
  EvaluateOptions eval;
  eval.ks = {10};
  eval.batch_size = 32;
  EXPECT_DOUBLE_EQ(evaluate(*result.model, s.split.valid, eval).rows.front().recall, best);
}

TEST(Train, DeterministicForSeed) {
  TinySetup s;
  s.options.max_epochs = 3;
  const TrainResult a = train(s.spec, s.split, s.options);
  const TrainResult b = train(s.spec, s.split, s.options);
  EXPECT_EQ(serialize_parameters(a.model->parameters()), serialize_parameters(b.model->parameters()));
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].train_loss, b.log[i].train_loss);
  s.options.config.seed = 6;
  const TrainResult c = train(s.spec, s.split, s.options);
  EXPECT_NE(serialize_parameters(a.model->parameters()), serialize_parameters(c.model->parameters()));
}

TEST(Train, EarlyStoppingHonoursPatience) {
  TinySetup s;
  s.options.max_epochs = 50;
  s.options.patience = 2;
  std::vector<int> seen;
  s.options.on_epoch = [&](const EpochLog& e) { seen.push_back(e.epoch); };
  const TrainResult result = train(s.spec, s.split, s.options);
  ASSERT_EQ(seen.size(), result.log.size());
  // Stops exactly `patience` epochs after the last improvement, or at the cap.
  EXPECT_TRUE(static_cast<int>(result.log.size()) == result.best_epoch + 2 || result.log.size() == 50u);
}

TEST(Train, DivergenceRaisesNumericError) {
  TinySetup s;
  s.options.config.learning_rate = 1e200;
  s.options.max_epochs = 3;
  try {
    train(s.spec, s.split, s.options);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("batch"), std::string::npos);
  }
}

TEST(Train, RejectsEmptyPartitionsAndBadOptions) {
  TinySetup s;
  DatasetSplit empty = s.split;
  empty.valid.clear();
  EXPECT_THROW(train(s.spec, empty, s.options), DataError);
  s.options.patience = 0;
  EXPECT_THROW(train(s.spec, s.split, s.options), ConfigError);
}

TEST(TrainingLog, CsvLayout) {
  const std::vector<EpochLog> log{{1, 2.5, 0.25, 0.5}, {2, 2.0, 0.5, 0.5}};
  std::ostringstream out;
  write_training_log(out, log);
  EXPECT_EQ(out.str(), "epoch,train_loss,valid_recall@10,wall_seconds\n1,2.5,0.25,0.5\n2,2,0.5,0.5\n");
}

TEST(AverageRuns, MeanPerKey) {
  const std::vector<MetricTable> runs{{{"recall", 0.2}, {"ndcg", 0.1}},
                                      {{"recall", 0.4}, {"ndcg", 0.3}},
                                      {{"recall", 0.6}, {"ndcg", 0.2}}};
  const MetricTable mean = average_runs(runs);
  EXPECT_NEAR(mean.at("recall"), 0.4, 1e-15);
  EXPECT_NEAR(mean.at("ndcg"), 0.2, 1e-15);
  const std::vector<MetricTable> single{{{"x", 0.7}}};
  EXPECT_EQ(average_runs(single).at("x"), 0.7);
}

TEST(AverageRuns, MismatchedKeys) {
  const std::vector<MetricTable> runs{{{"recall", 0.2}}, {{"ndcg", 0.1}}};
  EXPECT_THROW(average_runs(runs), DataError);
  EXPECT_THROW(average_runs(std::span<const MetricTable>{}), ConfigError);
}

}  // namespace
