#include "leakaudit/protection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "leakaudit/error.hpp"
#include "leakaudit/model.hpp"

namespace leakaudit {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::mt19937_64 example_engine(std::uint64_t seed, std::size_t example, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(example * 4 + stream)));
}

// Index drawn with probability weights[i] / sum(weights).
std::size_t draw_weighted(const std::vector<double>& weights, double total, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double target = unit(rng) * total;
  double acc = 0.0;
  std::size_t last_positive = weights.size();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  return last_positive;  // rounding at the upper end
}

void check_level(double L) {
  if (!(L >= 0.0 && L <= 1.0)) throw ConfigError("protection: L must lie in [0, 1]");
}

void check_positions(std::span<const int> slate, std::span<const int> positions) {
  for (int p : positions)
    if (p < 0 || static_cast<std::size_t>(p) >= slate.size())
      throw DataError("protection: position " + std::to_string(p) + " outside the slate");
}

}  // namespace

std::string_view to_string(SelectionKind kind) {
  return kind == SelectionKind::Random ? "random" : "similarity";
}

std::string_view to_string(ReplacementKind kind) {
  switch (kind) {
    case ReplacementKind::Uniform: return "uniform";
    case ReplacementKind::OverallPopularity: return "overall_pop";
    case ReplacementKind::InBatchPopularity: return "in_batch_pop";
  }
  return "?";
}

SelectionKind parse_selection_kind(std::string_view text) {
  if (text == "random") return SelectionKind::Random;
  if (text == "similarity") return SelectionKind::Similarity;
  throw ConfigError("unknown selection kind '" + std::string(text) + "' (random|similarity)");
}

ReplacementKind parse_replacement_kind(std::string_view text) {
  if (text == "uniform") return ReplacementKind::Uniform;
  if (text == "overall_pop" || text == "overall") return ReplacementKind::OverallPopularity;
  if (text == "in_batch_pop" || text == "in_batch") return ReplacementKind::InBatchPopularity;
  throw ConfigError("unknown replacement kind '" + std::string(text) +
                    "' (uniform|overall_pop|in_batch_pop)");
}

int replacement_count(int N, double L) {
  check_level(L);
  const double raw = static_cast<double>(N) * L;
  const double nearest = std::round(raw);
  const double m = std::abs(raw - nearest) < 1e-9 ? nearest : std::ceil(raw);
  return std::clamp(static_cast<int>(m), 0, N);
}

EmbeddingProvider::EmbeddingProvider(Eigen::MatrixXd table, std::string provenance)
    : table_(std::move(table)), provenance_(std::move(provenance)) {
  if (table_.rows() == 0 || table_.cols() == 0) throw DataError("embeddings: empty table");
}

EmbeddingProvider EmbeddingProvider::from_model(const AttackModel& model) {
  return EmbeddingProvider(model.item_embeddings(), "attack_model");
}

EmbeddingProvider EmbeddingProvider::read(std::istream& in, const Vocabulary& vocab) {
  Eigen::MatrixXd table;
  std::vector<bool> seen(static_cast<std::size_t>(vocab.num_items()), false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string id;
    fields >> id;
    std::vector<double> values;
    double v = 0.0;
    while (fields >> v) values.push_back(v);
    if (!fields.eof()) throw DataError("embeddings: bad number on line " + std::to_string(line_no));
    if (values.empty()) throw DataError("embeddings: no values on line " + std::to_string(line_no));
    if (table.size() == 0) table = Eigen::MatrixXd::Zero(vocab.num_items(), static_cast<Eigen::Index>(values.size()));
    if (static_cast<Eigen::Index>(values.size()) != table.cols())
      throw DataError("embeddings: inconsistent width on line " + std::to_string(line_no));
    if (!vocab.contains(id)) continue;  // extra items are harmless
    const int row = vocab.index_of(id);
    for (std::size_t c = 0; c < values.size(); ++c) table(row, static_cast<Eigen::Index>(c)) = values[c];
    seen[static_cast<std::size_t>(row)] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) throw DataError("embeddings: no vector for item '" + vocab.id_of(static_cast<int>(i)) + "'");
  return EmbeddingProvider(std::move(table), "external");
}

EmbeddingProvider EmbeddingProvider::load(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file " + path.string());
  return read(in, vocab);
}

Eigen::VectorXd EmbeddingProvider::embedding(int item) const {
  if (item < 0 || item >= table_.rows()) throw DataError("embeddings: item index out of range");
  return table_.row(item).transpose();
}

std::vector<int> select_positions_random(int N, double L, std::mt19937_64& rng) {
  const int m = replacement_count(N, L);
  std::vector<int> pool(static_cast<std::size_t>(N));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < m; ++i) {
    std::uniform_int_distribution<int> pick(i, N - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(m));
  std::sort(pool.begin(), pool.end());
  return pool;
}

Eigen::VectorXd user_preference_vector(std::span<const int> history, const EmbeddingProvider& provider) {
  if (history.empty()) throw DataError("preference vector: empty behavior history");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(provider.dim());
  for (int item : history) sum += provider.embedding(item);
  return sum / static_cast<double>(history.size());
}

SimilarityScores similarity_scores(const Eigen::VectorXd& preference, std::span<const int> slate,
                                   const EmbeddingProvider& provider, double omega) {
  if (!(omega > 0.0)) throw ConfigError("similarity: omega must be positive");
  SimilarityScores out;
  out.preference = preference;
  out.omega = omega;
  const auto n = static_cast<Eigen::Index>(slate.size());
  out.cosine.resize(n);
  const double pref_norm = preference.norm();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd e = provider.embedding(slate[static_cast<std::size_t>(i)]);
    out.cosine(i) = e.dot(preference) / std::max(e.norm() * pref_norm, omega);
  }
  out.s.resize(n);
  if (n > 0) {
    const double top = out.cosine.maxCoeff();
    out.s = (out.cosine.array() - top).exp().matrix();
    out.s /= out.s.sum();
  }
  return out;
}

std::vector<int> select_positions_similarity(const SimilarityScores& scores, double L,
                                             std::mt19937_64& rng, bool inverted) {
  const int N = static_cast<int>(scores.s.size());
  check_level(L);
  if (L > 0.0 && N == 0) throw DataError("similarity selection: empty slate");
  const int m = replacement_count(N, L);
  std::vector<double> weights(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i)
    weights[static_cast<std::size_t>(i)] = std::max(0.0, inverted ? scores.s(i) : 1.0 - scores.s(i));
  std::vector<bool> taken(static_cast<std::size_t>(N), false);
  std::vector<int> chosen;
  for (int draw = 0; draw < m; ++draw) {
    double total = 0.0;
    for (int i = 0; i < N; ++i)
      if (!taken[static_cast<std::size_t>(i)]) total += weights[static_cast<std::size_t>(i)];
    std::vector<double> live(static_cast<std::size_t>(N), 0.0);
    for (int i = 0; i < N; ++i)
      if (!taken[static_cast<std::size_t>(i)])
        live[static_cast<std::size_t>(i)] = total > 0.0 ? weights[static_cast<std::size_t>(i)] : 1.0;
    if (!(total > 0.0)) total = static_cast<double>(N - draw);
    const std::size_t pick = draw_weighted(live, total, rng);
    taken[pick] = true;
    chosen.push_back(static_cast<int>(pick));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::vector<int> replace_uniform(std::span<const int> slate, std::span<const int> positions,
                                 int num_items, std::mt19937_64& rng) {
  check_positions(slate, positions);
  if (num_items < 1) throw ConfigError("uniform replacement: empty item set");
  std::vector<int> out(slate.begin(), slate.end());
  std::uniform_int_distribution<int> item(0, num_items - 1);
  for (int p : positions) out[static_cast<std::size_t>(p)] = item(rng);
  return out;
}

PopularityModel::PopularityModel(Eigen::VectorXd counts) : counts_(std::move(counts)) {
  if ((counts_.array() < 0.0).any()) throw DataError("popularity: negative count");
}

PopularityModel PopularityModel::from_impressions(std::span<const AttackExample> examples, int num_items) {
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(num_items);
  for (const AttackExample& ex : examples)
    for (int item : ex.exposure.items) {
      if (item < 0 || item >= num_items) throw DataError("popularity: item index out of range");
      counts(item) += 1.0;
    }
  return PopularityModel(std::move(counts));
}

Eigen::VectorXd PopularityModel::in_batch_counts(std::span<const int> batch_items) const {
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(counts_.size());
  for (int item : batch_items) {
    if (item < 0 || item >= counts.size()) throw DataError("popularity: item index out of range");
    counts(item) += 1.0;
  }
  return counts;
}

std::vector<int> replace_popularity(std::span<const int> slate, std::span<const int> positions,
                                    const Eigen::VectorXd& counts, std::mt19937_64& rng) {
  check_positions(slate, positions);
  std::vector<int> out(slate.begin(), slate.end());
  if (positions.empty()) return out;
  const double total = counts.sum();
  if (!(total > 0.0)) throw DataError("popularity replacement: all counts are zero");
  const std::vector<double> weights(counts.data(), counts.data() + counts.size());
  for (int p : positions) out[static_cast<std::size_t>(p)] = static_cast<int>(draw_weighted(weights, total, rng));
  return out;
}

double recommendation_accuracy(std::span<const int> exposure, const std::unordered_set<int>& behavior) {
  if (exposure.empty()) throw DataError("accuracy: empty exposure");
  std::size_t hits = 0;
  for (int item : exposure) hits += behavior.count(item);
  return static_cast<double>(hits) / static_cast<double>(exposure.size());
}

std::vector<AttackExample> protect_examples(std::span<const AttackExample> examples,
                                            SelectionKind selection, ReplacementKind replacement,
                                            double L, std::uint64_t seed, int num_items,
                                            int batch_size, const ProtectionOptions& options,
                                            const EmbeddingProvider* embeddings) {
  check_level(L);
  if (batch_size < 1) throw ConfigError("protection: batch_size must be >= 1");
  if (replacement == ReplacementKind::OverallPopularity && !options.popularity)
    throw ConfigError("protection: overall popularity replacement needs training impressions");
  if (selection == SelectionKind::Similarity && embeddings == nullptr)
    throw ConfigError("protection: similarity selection needs item embeddings");

  std::vector<AttackExample> out(examples.begin(), examples.end());
  if (replacement_count(static_cast<int>(examples.empty() ? 0 : examples.front().exposure.items.size()), L) == 0)
    return out;

  const PopularityModel fallback(Eigen::VectorXd::Ones(num_items));
  const PopularityModel& pop = options.popularity ? *options.popularity : fallback;
  const auto step = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < examples.size(); start += step) {
    const std::size_t end = std::min(examples.size(), start + step);
    Eigen::VectorXd batch_counts;
    if (replacement == ReplacementKind::InBatchPopularity) {
      std::vector<int> batch_items;
      for (std::size_t e = start; e < end; ++e)
        batch_items.insert(batch_items.end(), examples[e].exposure.items.begin(),
                           examples[e].exposure.items.end());
      batch_counts = pop.in_batch_counts(batch_items);
    }
    for (std::size_t e = start; e < end; ++e) {
      const std::vector<int>& slate = examples[e].exposure.items;
      const int N = static_cast<int>(slate.size());
      std::mt19937_64 select_rng = example_engine(seed, e, 0);
      std::mt19937_64 replace_rng = example_engine(seed, e, 1);

      std::vector<int> positions;
      if (selection == SelectionKind::Similarity && !examples[e].behavior.items.empty()) {
        const Eigen::VectorXd pref = user_preference_vector(examples[e].behavior.items, *embeddings);
        const SimilarityScores scores = similarity_scores(pref, slate, *embeddings, options.omega);
        positions = select_positions_similarity(scores, L, select_rng, options.inverted_similarity);
      } else {
        positions = select_positions_random(N, L, select_rng);
      }

      std::vector<int>& target = out[e].exposure.items;
      switch (replacement) {
        case ReplacementKind::Uniform:
          target = replace_uniform(slate, positions, num_items, replace_rng);
          break;
        case ReplacementKind::OverallPopularity:
          target = replace_popularity(slate, positions, pop.counts(), replace_rng);
          break;
        case ReplacementKind::InBatchPopularity:
          target = replace_popularity(slate, positions, batch_counts, replace_rng);
          break;
      }
    }
  }
  return out;
}

namespace {

std::vector<std::unordered_set<int>> accuracy_targets(const std::vector<AttackExample>& examples,
                                                      const ProtectionOptions& options) {
  std::vector<std::unordered_set<int>> targets(examples.size());
  if (options.accuracy_scope == AccuracyScope::Window) {
    for (std::size_t e = 0; e < examples.size(); ++e)
      targets[e].insert(examples[e].behavior.items.begin(), examples[e].behavior.items.end());
    return targets;
  }
  std::map<std::string, std::unordered_set<int>> derived;
  const std::map<std::string, std::unordered_set<int>>* clicks = nullptr;
  if (options.user_clicks) {
    clicks = &*options.user_clicks;
  } else {
    for (const AttackExample& ex : examples)
      derived[ex.user].insert(ex.behavior.items.begin(), ex.behavior.items.end());
    clicks = &derived;
  }
  for (std::size_t e = 0; e < examples.size(); ++e) {
    const auto it = clicks->find(examples[e].user);
    if (it != clicks->end()) targets[e] = it->second;
    // The example's own window always belongs to the user's history.
    targets[e].insert(examples[e].behavior.items.begin(), examples[e].behavior.items.end());
  }
  return targets;
}

double mean_accuracy(const std::vector<AttackExample>& examples,
                     const std::vector<std::unordered_set<int>>& targets) {
  double sum = 0.0;
  for (std::size_t e = 0; e < examples.size(); ++e)
    sum += recommendation_accuracy(examples[e].exposure.items, targets[e]);
  return sum / static_cast<double>(examples.size());
}

}  // namespace

ProtectionReport evaluate_protection(const AttackModel& model,
                                     const std::vector<AttackExample>& examples,
                                     const ProtectionOptions& options) {
  if (examples.empty()) throw DataError("protection: empty test set");
  if (options.levels.empty() || options.seeds.empty() || options.selections.empty() ||
      options.replacements.empty())
    throw ConfigError("protection: empty sweep grid");
  for (double L : options.levels) check_level(L);

  const int num_items = model.spec().num_items;
  std::optional<EmbeddingProvider> own;
  const EmbeddingProvider* embeddings = options.embeddings ? &*options.embeddings : nullptr;
  if (embeddings == nullptr) {
    own.emplace(EmbeddingProvider::from_model(model));
    embeddings = &*own;
  }
  if (embeddings->num_items() != num_items)
    throw DataError("protection: embedding table does not cover the model's items");

  EvaluateOptions eval;
  eval.ks = options.ks;
  eval.batch_size = options.batch_size;
  eval.mrr_mode = options.mrr_mode;
  const auto targets = accuracy_targets(examples, options);

  ProtectionReport report;
  report.unprotected = evaluate(model, examples, eval).rows;
  report.unprotected_accuracy = mean_accuracy(examples, targets);

  for (SelectionKind selection : options.selections)
    for (ReplacementKind replacement : options.replacements)
      for (double L : options.levels)
        for (std::uint64_t seed : options.seeds) {
          const auto protected_examples = protect_examples(examples, selection, replacement, L, seed,
                                                           num_items, options.batch_size, options,
                                                           embeddings);
          const MetricsReport metrics = evaluate(model, protected_examples, eval);
          const double acc = mean_accuracy(protected_examples, targets);
          for (const MetricRow& m : metrics.rows)
            report.rows.push_back(
                ProtectionRow{selection, replacement, L, seed, m.k, m.recall, m.ndcg, m.mrr, acc});
        }
  return report;
}

void write_protection_csv(std::ostream& out, const ProtectionReport& report) {
  out << "selection,replacement,L,seed,k,recall,ndcg,mrr,acc\n";
  out.precision(17);
  for (const ProtectionRow& r : report.rows)
    out << to_string(r.selection) << ',' << to_string(r.replacement) << ',' << r.L << ',' << r.seed
        << ',' << r.k << ',' << r.recall << ',' << r.ndcg << ',' << r.mrr << ',' << r.accuracy << '\n';
}

std::vector<ProtectionRow> read_protection_csv(std::istream& in) {
  std::vector<ProtectionRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.rfind("selection,", 0) == 0) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) throw DataError("protection csv: expected 9 columns on line " + std::to_string(line_no));
    try {
      ProtectionRow r;
      r.selection = parse_selection_kind(cells[0]);
      r.replacement = parse_replacement_kind(cells[1]);
      r.L = std::stod(cells[2]);
      r.seed = std::stoull(cells[3]);
      r.k = std::stoi(cells[4]);
      r.recall = std::stod(cells[5]);
      r.ndcg = std::stod(cells[6]);
      r.mrr = std::stod(cells[7]);
      r.accuracy = std::stod(cells[8]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw DataError("protection csv: malformed value on line " + std::to_string(line_no));
    }
  }
  return rows;
}

}  // namespace leakaudit
