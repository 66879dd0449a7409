#pragma once

// Two-stage exposure perturbation: pick m = ceil(N*L) slate positions, then
// overwrite them with sampled items. Everything here is a pure function of
// its inputs and the supplied random engine.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "leakaudit/datamodel.hpp"
#include "leakaudit/metrics.hpp"

namespace leakaudit {

class AttackModel;

enum class SelectionKind { Random, Similarity };
enum class ReplacementKind { Uniform, OverallPopularity, InBatchPopularity };

std::string_view to_string(SelectionKind kind);
std::string_view to_string(ReplacementKind kind);
SelectionKind parse_selection_kind(std::string_view text);
ReplacementKind parse_replacement_kind(std::string_view text);

// ceil(N*L), tolerant of binary rounding in L (0.7*10 is 7, not 8).
int replacement_count(int N, double L);

struct ProtectionPlan {
  double L = 0.0;
  int m = 0;
  std::vector<int> positions;
  SelectionKind selection = SelectionKind::Random;
  ReplacementKind replacement = ReplacementKind::Uniform;
};

// Item embeddings used for similarity selection, |I| x d.
class EmbeddingProvider {
 public:
  EmbeddingProvider(Eigen::MatrixXd table, std::string provenance);

  static EmbeddingProvider from_model(const AttackModel& model);
  // Text rows "item_id v1 ... vd"; every vocabulary item must be covered.
  static EmbeddingProvider load(const std::filesystem::path& path, const Vocabulary& vocab);
  static EmbeddingProvider read(std::istream& in, const Vocabulary& vocab);

  int dim() const { return static_cast<int>(table_.cols()); }
  int num_items() const { return static_cast<int>(table_.rows()); }
  Eigen::VectorXd embedding(int item) const;
  const std::string& provenance() const { return provenance_; }

 private:
  Eigen::MatrixXd table_;
  std::string provenance_;
};

struct SimilarityScores {
  Eigen::VectorXd preference;  // b_u
  Eigen::VectorXd cosine;      // raw per-position cosine before the softmax
  Eigen::VectorXd s;           // softmax over positions
  double omega = 1e-8;
};

std::vector<int> select_positions_random(int N, double L, std::mt19937_64& rng);

// Mean embedding of the history items; DataError when the history is empty.
Eigen::VectorXd user_preference_vector(std::span<const int> history,
                                       const EmbeddingProvider& provider);

SimilarityScores similarity_scores(const Eigen::VectorXd& preference, std::span<const int> slate,
                                   const EmbeddingProvider& provider, double omega = 1e-8);

// Sequential draws without replacement, weight 1 - s(i) per remaining
// position (s(i) when `inverted`), renormalised after every draw. If every
// remaining weight is zero the draw falls back to uniform.
std::vector<int> select_positions_similarity(const SimilarityScores& scores, double L,
                                             std::mt19937_64& rng, bool inverted = false);

std::vector<int> replace_uniform(std::span<const int> slate, std::span<const int> positions,
                                 int num_items, std::mt19937_64& rng);

class PopularityModel {
 public:
  // Impression counts over the given examples' slates.
  static PopularityModel from_impressions(std::span<const AttackExample> examples, int num_items);
  explicit PopularityModel(Eigen::VectorXd counts);

  const Eigen::VectorXd& counts() const { return counts_; }
  int num_items() const { return static_cast<int>(counts_.size()); }
  // Counts of the items in `batch_items`, zero elsewhere.
  Eigen::VectorXd in_batch_counts(std::span<const int> batch_items) const;

 private:
  Eigen::VectorXd counts_;
};

// Draws each selected position independently with probability proportional
// to `counts`. DataError when the counts sum to zero.
std::vector<int> replace_popularity(std::span<const int> slate, std::span<const int> positions,
                                    const Eigen::VectorXd& counts, std::mt19937_64& rng);

// |E* n B| / |E*| with every slate position counted once.
double recommendation_accuracy(std::span<const int> exposure, const std::unordered_set<int>& behavior);

enum class AccuracyScope {
  FullHistory,  // every click of the user known to the evaluation
  Window,       // only the example's own M behavior items
};

struct ProtectionOptions {
  std::vector<double> levels{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<SelectionKind> selections{SelectionKind::Random, SelectionKind::Similarity};
  std::vector<ReplacementKind> replacements{ReplacementKind::Uniform,
                                            ReplacementKind::OverallPopularity,
                                            ReplacementKind::InBatchPopularity};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<int> ks{10};
  int batch_size = 400;
  MrrMode mrr_mode = MrrMode::PerItem;
  AccuracyScope accuracy_scope = AccuracyScope::FullHistory;
  bool inverted_similarity = false;
  double omega = 1e-8;
  // Required for overall-popularity replacement.
  std::optional<PopularityModel> popularity;
  // Defaults to the attack model's own item table.
  std::optional<EmbeddingProvider> embeddings;
  // Per-user click sets for FullHistory; when absent, the union of behavior
  // items over the user's evaluated examples.
  std::optional<std::map<std::string, std::unordered_set<int>>> user_clicks;
};

struct ProtectionRow {
  SelectionKind selection = SelectionKind::Random;
  ReplacementKind replacement = ReplacementKind::Uniform;
  double L = 0.0;
  std::uint64_t seed = 0;
  int k = 10;
  double recall = 0.0;
  double ndcg = 0.0;
  double mrr = 0.0;
  double accuracy = 0.0;
};

struct ProtectionReport {
  std::vector<ProtectionRow> rows;
  std::vector<MetricRow> unprotected;  // one per k
  double unprotected_accuracy = 0.0;
};

// Protected copy of every example's slate for one configuration. Example e
// draws from an engine seeded by (seed, e), so the same example sees the same
// stream under every selection/replacement choice.
std::vector<AttackExample> protect_examples(std::span<const AttackExample> examples,
                                            SelectionKind selection, ReplacementKind replacement,
                                            double L, std::uint64_t seed, int num_items,
                                            int batch_size, const ProtectionOptions& options,
                                            const EmbeddingProvider* embeddings);

ProtectionReport evaluate_protection(const AttackModel& model,
                                     const std::vector<AttackExample>& examples,
                                     const ProtectionOptions& options);

// selection,replacement,L,seed,k,recall,ndcg,mrr,acc
void write_protection_csv(std::ostream& out, const ProtectionReport& report);
std::vector<ProtectionRow> read_protection_csv(std::istream& in);

}  // namespace leakaudit
