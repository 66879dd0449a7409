#include "leakaudit/datamodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "leakaudit/error.hpp"
#include "leakaudit/hash.hpp"

namespace leakaudit {

// --- Vocabulary ------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> item_ids) : ids_(std::move(item_ids)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  if (ids_.empty()) throw DataError("empty dataset: vocabulary has no items");
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) index_.emplace(ids_[i], static_cast<ItemIndex>(i));
}

ItemIndex Vocabulary::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw DataError("unknown item id '" + id + "'");
  return it->second;
}

const std::string& Vocabulary::id_of(ItemIndex index) const {
  if (!is_item(index)) throw DataError("item index out of range: " + std::to_string(index));
  return ids_[static_cast<std::size_t>(index)];
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < ids_.size(); ++i) out << i << '\t' << ids_[i] << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("vocabulary: malformed line " + std::to_string(line_no));
    if (std::stoul(line.substr(0, tab)) != ids.size())
      throw DataError("vocabulary: indices must be dense and ordered (line " +
                      std::to_string(line_no) + ")");
    ids.push_back(line.substr(tab + 1));
  }
  Vocabulary vocab(ids);
  if (vocab.ids_ != ids) throw DataError("vocabulary: ids must be sorted and unique");
  return vocab;
}

std::uint64_t Vocabulary::fingerprint() const {
  Fnv1a h;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    h.update(std::to_string(i));
    h.update("\t");
    h.update(ids_[i]);
    h.update("\n");
  }
  return h.digest();
}

// --- AttackConfig ----------------------------------------------------------

void AttackConfig::validate() const {
  if (M < 1) throw ConfigError("M must be >= 1");
  if (N < 1) throw ConfigError("N must be >= 1");
  if (d < 1) throw ConfigError("d must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (heads < 1 || d % heads != 0) throw ConfigError("heads must divide d");
  if (epsilon != 0.0 && !(epsilon > 0.0 && epsilon < 1.0))
    throw ConfigError("epsilon must lie in (0, 1) (0 selects 1/|I|)");
}

// --- building --------------------------------------------------------------

Vocabulary build_vocabulary(const InteractionLog& log) {
  if (log.empty()) throw DataError("empty dataset: interaction log has no users");
  std::set<std::string> ids;
  for (const UserLog& u : log.users())
    for (const Event& e : u.events) ids.insert(e.items.begin(), e.items.end());
  if (ids.empty()) throw DataError("empty dataset: interaction log has no items");
  return Vocabulary({ids.begin(), ids.end()});
}

std::vector<AttackExample> build_examples(const InteractionLog& log, const Vocabulary& vocab,
                                          int M, int N) {
  if (M <= 0 || N <= 0) throw ConfigError("build_examples: M and N must be positive");
  std::vector<AttackExample> examples;
  for (const UserLog& u : log.users()) {
    std::vector<std::pair<ItemIndex, std::int64_t>> clicks;
    std::vector<const Event*> slates;
    for (const Event& e : u.events) {
      if (e.kind == EventKind::Click)
        clicks.emplace_back(vocab.index_of(e.items.front()), e.timestamp);
      else
        slates.push_back(&e);
    }
    for (std::size_t s = 0; s < slates.size(); ++s) {
      const std::int64_t anchor = slates[s]->timestamp;
      // Clicks strictly before the anchor; events are timestamp-sorted.
      const auto before = static_cast<std::size_t>(
          std::lower_bound(clicks.begin(), clicks.end(), anchor,
                           [](const auto& c, std::int64_t t) { return c.second < t; }) -
          clicks.begin());
      if (before < static_cast<std::size_t>(M)) continue;

      std::vector<ItemIndex> exposure;
      for (std::size_t k = s; k < slates.size() && exposure.size() < static_cast<std::size_t>(N); ++k)
        for (const std::string& item : slates[k]->items) {
          if (exposure.size() == static_cast<std::size_t>(N)) break;
          exposure.push_back(vocab.index_of(item));
        }
      if (exposure.size() < static_cast<std::size_t>(N)) continue;

      AttackExample ex;
      ex.user = u.user;
      ex.behavior.user = u.user;
      for (std::size_t j = before - static_cast<std::size_t>(M); j < before; ++j) {
        ex.behavior.items.push_back(clicks[j].first);
        ex.behavior.timestamps.push_back(clicks[j].second);
      }
      ex.exposure = ExposureSlate{u.user, std::move(exposure), anchor};
      examples.push_back(std::move(ex));
    }
  }
  return examples;
}

DatasetSplit split_by_user(const std::vector<AttackExample>& examples, SplitRatios ratios,
                           std::uint64_t seed) {
  if (ratios.train < 0 || ratios.valid < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9)
    throw ConfigError("split ratios must be non-negative and sum to 1");

  std::vector<std::string> users;
  std::set<std::string> seen;
  for (const AttackExample& ex : examples)
    if (seen.insert(ex.user).second) users.push_back(ex.user);
  if (users.size() < 3) throw DataError("split_by_user: need at least 3 users, got " +
                                        std::to_string(users.size()));

  std::mt19937_64 rng(seed);
  std::shuffle(users.begin(), users.end(), rng);

  const auto n = static_cast<long>(users.size());
  long n_valid = std::max(1L, std::lround(ratios.valid * static_cast<double>(n)));
  long n_test = std::max(1L, std::lround(ratios.test * static_cast<double>(n)));
  long n_train = n - n_valid - n_test;
  if (n_train < 1) {
    n_train = 1;
    n_valid = (n - 1) / 2;
    n_test = n - 1 - n_valid;
  }

  DatasetSplit split;
  for (long i = 0; i < n; ++i) {
    const int part = i < n_train ? 0 : (i < n_train + n_valid ? 1 : 2);
    split.user_assignment[users[static_cast<std::size_t>(i)]] = part;
  }
  for (const AttackExample& ex : examples) {
    switch (split.user_assignment.at(ex.user)) {
      case 0: split.train.push_back(ex); break;
      case 1: split.valid.push_back(ex); break;
      default: split.test.push_back(ex); break;
    }
  }
  return split;
}

// --- serialization ---------------------------------------------------------

namespace {

void write_indices(std::ostream& out, const std::vector<ItemIndex>& items) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out << ',';
    out << items[i];
  }
}

std::vector<ItemIndex> parse_indices(const std::string& text, std::size_t line_no) {
  std::vector<ItemIndex> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = std::min(text.find(',', start), text.size());
    ItemIndex value = 0;
    const char* first = text.data() + start;
    const char* last = text.data() + comma;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || value < 0)
      throw DataError("dataset: bad index list on line " + std::to_string(line_no));
    out.push_back(value);
    start = comma + 1;
  }
  return out;
}

}  // namespace

void write_examples(std::ostream& out, const std::vector<AttackExample>& examples) {
  for (const AttackExample& ex : examples) {
    out << ex.user << '\t';
    write_indices(out, ex.behavior.items);
    out << '\t';
    write_indices(out, ex.exposure.items);
    out << '\t' << ex.exposure.timestamp << '\n';
  }
}

void save_examples(const std::filesystem::path& path, const std::vector<AttackExample>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_examples(out, examples);
}

std::vector<AttackExample> read_examples(std::istream& in) {
  std::vector<AttackExample> examples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, '\t')) fields.push_back(field);
    if (fields.size() != 4)
      throw DataError("dataset: expected 4 tab-separated fields on line " + std::to_string(line_no));
    AttackExample ex;
    ex.user = fields[0];
    ex.behavior.user = fields[0];
    ex.behavior.items = parse_indices(fields[1], line_no);
    ex.exposure.user = fields[0];
    ex.exposure.items = parse_indices(fields[2], line_no);
    std::int64_t ts = 0;
    auto [ptr, ec] = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), ts);
    if (ec != std::errc() || ptr != fields[3].data() + fields[3].size())
      throw DataError("dataset: bad timestamp on line " + std::to_string(line_no));
    ex.exposure.timestamp = ts;
    examples.push_back(std::move(ex));
  }
  return examples;
}

std::vector<AttackExample> load_examples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_examples(in);
}

}  // namespace leakaudit
