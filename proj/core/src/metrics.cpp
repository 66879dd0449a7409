#include "leakaudit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include "leakaudit/error.hpp"
#include "leakaudit/model.hpp"

namespace leakaudit {

std::vector<int> top_k(const Eigen::VectorXd& scores, int k) {
  const int n = static_cast<int>(scores.size());
  k = std::clamp(k, 0, n);
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
    return scores(a) > scores(b) || (scores(a) == scores(b) && a < b);
  });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

std::vector<int> ranked_list(const RankedInference& inference, int k, int M) {
  if (k <= 0) throw ConfigError("ranked_list: k must be positive");
  if (M <= 0) throw ConfigError("ranked_list: M must be positive");
  if (inference.scores.empty()) throw DataError("ranked_list: inference has no scores");
  const auto items = static_cast<long>(inference.scores.front().size());
  if (static_cast<long>(k) * M > items) throw ConfigError("ranked_list: k*M exceeds |I|");

  if (inference.mode == RankedInference::Mode::Pointwise) return top_k(inference.scores.front(), k * M);

  std::vector<std::vector<int>> per_position;
  per_position.reserve(inference.scores.size());
  for (const auto& s : inference.scores) per_position.push_back(top_k(s, k));
  std::vector<int> list;
  std::unordered_set<int> seen;
  for (int rank = 0; rank < k; ++rank)
    for (const auto& tops : per_position)
      if (seen.insert(tops[static_cast<std::size_t>(rank)]).second)
        list.push_back(tops[static_cast<std::size_t>(rank)]);
  return list;
}

double recall_at_k(std::span<const int> list, std::span<const int> behavior, int M) {
  const std::unordered_set<int> members(list.begin(), list.end());
  int hits = 0;
  for (int b : behavior) hits += members.count(b) ? 1 : 0;
  return static_cast<double>(hits) / M;
}

double ndcg_at_k(std::span<const int> list, std::span<const int> behavior, int M) {
  const std::unordered_set<int> targets(behavior.begin(), behavior.end());
  double dcg = 0.0;
  for (std::size_t r = 0; r < list.size(); ++r)
    if (targets.count(list[r])) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  const std::size_t ideal_hits = std::min(static_cast<std::size_t>(M), list.size());
  double idcg = 0.0;
  for (std::size_t r = 0; r < ideal_hits; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

double mrr_at_k(std::span<const int> list, std::span<const int> behavior, int M, MrrMode mode) {
  if (mode == MrrMode::FirstHit) {
    const std::unordered_set<int> targets(behavior.begin(), behavior.end());
    for (std::size_t r = 0; r < list.size(); ++r)
      if (targets.count(list[r])) return 1.0 / static_cast<double>(r + 1);
    return 0.0;
  }
  double total = 0.0;
  for (int b : behavior) {
    const auto it = std::find(list.begin(), list.end(), b);
    if (it != list.end()) total += 1.0 / static_cast<double>(it - list.begin() + 1);
  }
  return total / M;
}

ExampleMetrics score_example(const RankedInference& inference, std::span<const int> behavior,
                             std::span<const int> ks, MrrMode mrr_mode) {
  const int M = static_cast<int>(behavior.size());
  ExampleMetrics out;
  for (int k : ks) {
    const auto list = ranked_list(inference, k, M);
    out.rows.push_back(MetricRow{k, recall_at_k(list, behavior, M), ndcg_at_k(list, behavior, M),
                                 mrr_at_k(list, behavior, M, mrr_mode)});
  }
  return out;
}

MetricRow mean_row(std::span<const ExampleMetrics> examples, std::size_t k_slot) {
  if (examples.empty()) throw DataError("evaluate: empty example set");
  MetricRow mean;
  mean.k = examples.front().rows.at(k_slot).k;
  for (const ExampleMetrics& ex : examples) {
    const MetricRow& r = ex.rows.at(k_slot);
    mean.recall += r.recall;
    mean.ndcg += r.ndcg;
    mean.mrr += r.mrr;
  }
  const auto n = static_cast<double>(examples.size());
  mean.recall /= n;
  mean.ndcg /= n;
  mean.mrr /= n;
  return mean;
}

MetricsReport evaluate(const AttackModel& model, const std::vector<AttackExample>& examples,
                       const EvaluateOptions& options) {
  if (examples.empty()) throw DataError("evaluate: empty test set");
  if (options.ks.empty()) throw ConfigError("evaluate: no cut-offs given");
  if (options.batch_size < 1) throw ConfigError("evaluate: batch_size must be >= 1");
  const ModelSpec& spec = model.spec();

  MetricsReport report;
  report.encoder = std::string(to_string(spec.encoder));
  report.decoder = std::string(to_string(spec.decoder));
  report.n_examples = examples.size();
  report.mrr_mode = options.mrr_mode;

  std::vector<ExampleMetrics> scored;
  scored.reserve(examples.size());
  const auto step = static_cast<std::size_t>(options.batch_size);
  for (std::size_t start = 0; start < examples.size(); start += step) {
    const std::size_t end = std::min(examples.size(), start + step);
    std::vector<int> slates;
    for (std::size_t i = start; i < end; ++i)
      slates.insert(slates.end(), examples[i].exposure.items.begin(), examples[i].exposure.items.end());
    const auto inferred = model.infer(slates);
    for (std::size_t i = start; i < end; ++i) {
      ExampleMetrics m = score_example(inferred[i - start], examples[i].behavior.items, options.ks,
                                       options.mrr_mode);
      m.example = i;
      scored.push_back(std::move(m));
    }
  }
  for (std::size_t slot = 0; slot < options.ks.size(); ++slot) report.rows.push_back(mean_row(scored, slot));
  if (options.keep_per_example) report.per_example = std::move(scored);
  return report;
}

void write_metrics_csv(std::ostream& out, const MetricsReport& report) {
  out << "# ranked_list=round_robin_by_rank mrr="
      << (report.mrr_mode == MrrMode::PerItem ? "per_item" : "first_hit") << '\n';
  out << "encoder,decoder,k,recall,ndcg,mrr,n_examples\n";
  out.precision(17);
  for (const MetricRow& r : report.rows)
    out << report.encoder << ',' << report.decoder << ',' << r.k << ',' << r.recall << ','
        << r.ndcg << ',' << r.mrr << ',' << report.n_examples << '\n';
}

void write_per_example_csv(std::ostream& out, const MetricsReport& report) {
  out << "example,k,recall,ndcg,mrr\n";
  out.precision(17);
  for (const ExampleMetrics& ex : report.per_example)
    for (const MetricRow& r : ex.rows)
      out << ex.example << ',' << r.k << ',' << r.recall << ',' << r.ndcg << ',' << r.mrr << '\n';
}

}  // namespace leakaudit
