#pragma once

// Ranked-list construction and the Recall / NDCG / MRR attack metrics.
//
// A ranked list holds up to k*M items. Point-wise inference contributes its
// top k*M items; sequence-wise inference contributes the top-k of each of the
// M positions, merged round-robin by rank (rank 1 of every position first,
// then rank 2, ...) with duplicates dropped. Ties in score break toward the
// smaller item index.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "leakaudit/datamodel.hpp"

namespace leakaudit {

class AttackModel;

struct RankedInference {
  enum class Mode { Pointwise, Sequencewise };
  Mode mode = Mode::Pointwise;
  // Point-wise: one score vector over items. Sequence-wise: one per inferred
  // position, most recent first. Special tokens are never included.
  std::vector<Eigen::VectorXd> scores;
};

enum class MrrMode {
  PerItem,   // mean over the M targets of 1/rank (0 when absent)
  FirstHit,  // 1/rank of the first list entry that is a target
};

// Indices of the k largest scores, descending, ties toward smaller index.
std::vector<int> top_k(const Eigen::VectorXd& scores, int k);

std::vector<int> ranked_list(const RankedInference& inference, int k, int M);

// Targets are counted with multiplicity: a list item matches every equal
// entry of `behavior`.
double recall_at_k(std::span<const int> list, std::span<const int> behavior, int M);
// Binary-relevance DCG with gain 1/log2(rank+1), divided by the ideal DCG of
// min(M, |list|) hits at the top.
double ndcg_at_k(std::span<const int> list, std::span<const int> behavior, int M);
double mrr_at_k(std::span<const int> list, std::span<const int> behavior, int M,
                MrrMode mode = MrrMode::PerItem);

struct MetricRow {
  int k = 0;
  double recall = 0.0;
  double ndcg = 0.0;
  double mrr = 0.0;
};

struct ExampleMetrics {
  std::size_t example = 0;
  std::vector<MetricRow> rows;  // one per k
};

struct MetricsReport {
  std::string encoder;
  std::string decoder;
  std::size_t n_examples = 0;
  std::vector<MetricRow> rows;  // averages, one per k
  std::vector<ExampleMetrics> per_example;
  MrrMode mrr_mode = MrrMode::PerItem;
};

struct EvaluateOptions {
  std::vector<int> ks{5, 10, 20};
  int batch_size = 400;
  MrrMode mrr_mode = MrrMode::PerItem;
  bool keep_per_example = false;
};

ExampleMetrics score_example(const RankedInference& inference, std::span<const int> behavior,
                             std::span<const int> ks, MrrMode mrr_mode);

// Mean of per-example metrics; throws DataError on an empty set.
MetricRow mean_row(std::span<const ExampleMetrics> examples, std::size_t k_slot);

MetricsReport evaluate(const AttackModel& model, const std::vector<AttackExample>& examples,
                       const EvaluateOptions& options = {});

// encoder,decoder,k,recall,ndcg,mrr,n_examples with a leading '#' comment
// recording the list merge order and MRR convention.
void write_metrics_csv(std::ostream& out, const MetricsReport& report);
// example,k,recall,ndcg,mrr
void write_per_example_csv(std::ostream& out, const MetricsReport& report);

}  // namespace leakaudit
