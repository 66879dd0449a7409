#include "leakaudit/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "leakaudit/checkpoint.hpp"
#include "leakaudit/error.hpp"

namespace leakaudit {

TrainResult train(const ModelSpec& spec, const DatasetSplit& split, const TrainOptions& options) {
  const AttackConfig& cfg = options.config;
  cfg.validate();
  if (split.train.empty()) throw DataError("train: empty training partition");
  if (split.valid.empty()) throw DataError("train: empty validation partition");
  if (options.max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (options.patience < 1) throw ConfigError("train: patience must be >= 1");

  TrainResult result;
  result.model = std::make_unique<AttackModel>(spec, cfg.seed);
  AttackModel& model = *result.model;
  result.adam = options.adam;
  result.adam.learning_rate = cfg.learning_rate;
  Adam optimizer(model.parameters(), result.adam);

  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5DEECE66DULL);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  ForwardContext train_ctx{true, spec.dropout, &dropout_rng};

  EvaluateOptions eval;
  eval.ks = {options.eval_k};
  eval.batch_size = cfg.batch_size;

  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::string best_snapshot = serialize_parameters(model.parameters());
  int stale = 0;
  std::size_t global_batch = 0;

  for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const AttackExample*> members;
      for (std::size_t i = start; i < end; ++i) members.push_back(&split.train[order[i]]);
      const Batch batch = Batch::from(std::span<const AttackExample* const>(members), spec.M, spec.N);

      model.parameters().zero_grad();
      const Var loss = model.loss(batch, train_ctx);
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value))
        throw NumericError("training diverged: non-finite loss at batch " +
                           std::to_string(global_batch) + " (epoch " + std::to_string(epoch) + ")");
      loss.backward();
      optimizer.step();
      loss_sum += value;
      ++batches;
      ++global_batch;
    }

    const double recall = evaluate(model, split.valid, eval).rows.front().recall;
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(batches);
    entry.valid_recall_at_10 = recall;
    entry.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.push_back(entry);
    if (options.on_epoch) options.on_epoch(entry);

    if (recall > result.best_valid_recall) {
      result.best_valid_recall = recall;
      result.best_epoch = epoch;
      best_snapshot = serialize_parameters(model.parameters());
      stale = 0;
    } else if (++stale >= options.patience) {
      break;
    }
  }
  deserialize_parameters(best_snapshot, model.parameters());
  return result;
}

void write_training_log(std::ostream& out, std::span<const EpochLog> log) {
  out << "epoch,train_loss,valid_recall@10,wall_seconds\n";
  out.precision(10);
  for (const EpochLog& e : log)
    out << e.epoch << ',' << e.train_loss << ',' << e.valid_recall_at_10 << ',' << e.wall_seconds << '\n';
}

MetricTable average_runs(std::span<const MetricTable> runs) {
  if (runs.empty()) throw ConfigError("average_runs: need at least one run");
  MetricTable mean = runs.front();
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].size() != mean.size()) throw DataError("average_runs: metric keys differ");
    for (const auto& [key, value] : runs[r]) {
      auto it = mean.find(key);
      if (it == mean.end()) throw DataError("average_runs: metric keys differ ('" + key + "')");
      it->second += value;
    }
  }
  if (runs.size() > 1)
    for (auto& [key, value] : mean) value /= static_cast<double>(runs.size());
  return mean;
}

}  // namespace leakaudit
