#pragma once

// Core entities of the attack dataset: the item vocabulary, behavior
// sequences, exposure slates and the paired examples built from them.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "leakaudit/interaction_log.hpp"

namespace leakaudit {

using ItemIndex = int;

// Dense item indices [0, |I|) followed by the reserved special tokens. END
// sits directly after the items so that "items + END" is a contiguous output
// space for the sequence decoders.
class Vocabulary {
 public:
  Vocabulary() = default;
  // Item ids are sorted lexicographically before indexing.
  explicit Vocabulary(std::vector<std::string> item_ids);

  int num_items() const { return static_cast<int>(ids_.size()); }
  // Items plus special tokens; row count of every embedding table.
  int table_size() const { return num_items() + kNumSpecialTokens; }

  ItemIndex end_token() const { return num_items(); }
  ItemIndex start_token() const { return num_items() + 1; }
  ItemIndex cls_token() const { return num_items() + 2; }
  ItemIndex pad_token() const { return num_items() + 3; }
  bool is_item(ItemIndex index) const { return index >= 0 && index < num_items(); }

  // Throws DataError for unknown ids.
  ItemIndex index_of(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  const std::string& id_of(ItemIndex index) const;
  const std::vector<std::string>& ids() const { return ids_; }

  // One line per item: index TAB id.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);
  // FNV-1a over the serialized form; detects checkpoint/data mismatches.
  std::uint64_t fingerprint() const;

  static constexpr int kNumSpecialTokens = 4;

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, ItemIndex> index_;
};

struct BehaviorSequence {
  std::string user;
  std::vector<ItemIndex> items;  // oldest -> newest
  std::vector<std::int64_t> timestamps;  // optional, parallel to items
};

struct ExposureSlate {
  std::string user;
  std::vector<ItemIndex> items;
  std::int64_t timestamp = 0;
};

struct AttackExample {
  std::string user;
  BehaviorSequence behavior;
  ExposureSlate exposure;
};

struct DatasetSplit {
  std::vector<AttackExample> train;
  std::vector<AttackExample> valid;
  std::vector<AttackExample> test;
  std::map<std::string, int> user_assignment;  // 0 train, 1 valid, 2 test
};

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

// Hyperparameters shared by the attack model and the trainer. Defaults
// follow the published setup (batch 400, lr 1e-3, dropout 0.1, d = 128,
// 2 heads, M = 5, N = 10); epsilon <= 0 means "use 1/|I|".
struct AttackConfig {
  int M = 5;
  int N = 10;
  int d = 128;
  int batch_size = 400;
  double learning_rate = 0.001;
  double dropout = 0.1;
  int heads = 2;
  double epsilon = 0.0;
  std::uint64_t seed = 1;

  // Throws ConfigError on violated invariants.
  void validate() const;
};

Vocabulary build_vocabulary(const InteractionLog& log);

// One example per impression slate: the M most recent clicks strictly before
// the slate time and the first N impressions at or after it.
std::vector<AttackExample> build_examples(const InteractionLog& log, const Vocabulary& vocab,
                                          int M, int N);

DatasetSplit split_by_user(const std::vector<AttackExample>& examples, SplitRatios ratios,
                           std::uint64_t seed);

// Tab-separated record format: user, behavior indices (oldest -> newest),
// exposure indices, anchor timestamp.
void write_examples(std::ostream& out, const std::vector<AttackExample>& examples);
void save_examples(const std::filesystem::path& path, const std::vector<AttackExample>& examples);
std::vector<AttackExample> read_examples(std::istream& in);
std::vector<AttackExample> load_examples(const std::filesystem::path& path);

}  // namespace leakaudit
