#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "leakaudit/datamodel.hpp"
#include "leakaudit/model.hpp"
#include "leakaudit/optimizer.hpp"

namespace leakaudit {

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_recall_at_10 = 0.0;
  double wall_seconds = 0.0;
};

struct TrainOptions {
  AttackConfig config;
  int max_epochs = 100;
  int patience = 5;  // epochs without validation improvement before stopping
  int eval_k = 10;
  AdamOptions adam{};  // learning_rate is taken from config
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  std::unique_ptr<AttackModel> model;  // restored to the best validation epoch
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_valid_recall = -1.0;
  AdamOptions adam;
};

// Mini-batch Adam training with dropout active only in the forward passes
// used for gradients. The returned model carries the parameters (rounded to
// checkpoint precision) of the epoch with the highest validation Recall@k.
// Single-threaded and fully determined by config.seed.
TrainResult train(const ModelSpec& spec, const DatasetSplit& split, const TrainOptions& options);

// epoch,train_loss,valid_recall@10,wall_seconds
void write_training_log(std::ostream& out, std::span<const EpochLog> log);

using MetricTable = std::map<std::string, double>;

// Per-key arithmetic mean; all tables must share the same keys.
MetricTable average_runs(std::span<const MetricTable> runs);

}  // namespace leakaudit
