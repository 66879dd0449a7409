#pragma once

// Parsers for the public log formats and the planted-signal generator used
// to verify the attack end to end.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "leakaudit/interaction_log.hpp"

namespace leakaudit {

struct ParseStats {
  std::size_t lines = 0;
  std::size_t rejected = 0;  // records dropped with a warning
};

// MIND behaviors.tsv: impression_id, user_id, time, space-separated history,
// space-separated impressions suffixed -1 (clicked) / -0. The time column may
// be "M/D/YYYY h:mm:ss AM|PM" or integer epoch seconds. History items get
// synthetic timestamps one second apart ending just before the impression; a
// history identical to the user's previous one is not re-emitted.
InteractionLog parse_mind(std::istream& in, ParseStats* stats = nullptr);
InteractionLog parse_mind(const std::filesystem::path& path, ParseStats* stats = nullptr);

// Zhihu-style TSV: user_id, item_id, show_time, click_time (0 = not clicked).
// Shows are grouped into one slate per (user, show_time). Records whose click
// precedes the show are rejected and counted.
InteractionLog parse_zhihu(std::istream& in, ParseStats* stats = nullptr);
InteractionLog parse_zhihu(const std::filesystem::path& path, ParseStats* stats = nullptr);

// Epoch seconds from "M/D/YYYY h:mm:ss AM|PM" or a plain integer.
std::int64_t parse_mind_time(const std::string& text);

struct SyntheticConfig {
  int n_users = 200;
  int n_items = 500;
  int n_slates_per_user = 20;
  int M = 5;
  int N = 10;
  double signal_strength = 0.8;  // rho: probability a slate position carries signal
  int transition_graph_degree = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

// Item ids are "i<k>" with k the generator's internal index.
struct SyntheticCorpus {
  InteractionLog log;
  // neighbors[k] = out-neighbours of generator item k in the transition graph.
  std::vector<std::vector<int>> neighbors;
};

// Builds a random transition graph whose edges are the union of `degree`
// random single-cycle permutations; users random-walk it to click, and each
// slate position is, with probability rho, a neighbour of one of the last M
// clicks and otherwise a uniformly random item.
SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& cfg);
InteractionLog generate_synthetic(const SyntheticConfig& cfg);

}  // namespace leakaudit
