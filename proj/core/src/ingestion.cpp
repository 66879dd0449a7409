#include "leakaudit/ingestion.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <chrono>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "leakaudit/error.hpp"

namespace leakaudit {

// --- InteractionLog --------------------------------------------------------

UserLog& InteractionLog::user_log(const std::string& user) {
  auto [it, inserted] = index_.try_emplace(user, users_.size());
  if (inserted) users_.push_back(UserLog{user, {}});
  return users_[it->second];
}

void InteractionLog::add_click(const std::string& user, std::string item, std::int64_t timestamp) {
  user_log(user).events.push_back(Event{EventKind::Click, {std::move(item)}, timestamp});
}

void InteractionLog::add_impression(const std::string& user, std::vector<std::string> items,
                                    std::int64_t timestamp) {
  if (items.empty()) throw DataError("impression slate for user '" + user + "' has no items");
  user_log(user).events.push_back(Event{EventKind::Impression, std::move(items), timestamp});
}

void InteractionLog::finalize() {
  for (UserLog& u : users_) {
    std::stable_sort(u.events.begin(), u.events.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
  }
}

const UserLog* InteractionLog::find(const std::string& user) const {
  auto it = index_.find(user);
  return it == index_.end() ? nullptr : &users_[it->second];
}

std::size_t InteractionLog::num_clicks() const {
  std::size_t n = 0;
  for (const UserLog& u : users_)
    for (const Event& e : u.events) n += e.kind == EventKind::Click ? 1 : 0;
  return n;
}

std::size_t InteractionLog::num_impression_events() const {
  std::size_t n = 0;
  for (const UserLog& u : users_)
    for (const Event& e : u.events) n += e.kind == EventKind::Impression ? 1 : 0;
  return n;
}

std::size_t InteractionLog::num_impressed_items() const {
  std::size_t n = 0;
  for (const UserLog& u : users_)
    for (const Event& e : u.events)
      if (e.kind == EventKind::Impression) n += e.items.size();
  return n;
}

// --- helpers ---------------------------------------------------------------

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> split_ws(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string token;
  while (in >> token) out.push_back(token);
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool parse_int(const std::string& text, std::int64_t& value) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last;
}

std::string at_line(std::size_t line) { return " (line " + std::to_string(line) + ")"; }

}  // namespace

std::int64_t parse_mind_time(const std::string& text) {
  std::int64_t epoch = 0;
  if (parse_int(text, epoch)) return epoch;

  unsigned month = 0, day = 0, hour = 0, minute = 0, second = 0;
  int year = 0;
  char ampm[3] = {0, 0, 0};
  if (std::sscanf(text.c_str(), "%u/%u/%d %u:%u:%u %2s", &month, &day, &year, &hour, &minute,
                  &second, ampm) != 7) {
    throw DataError("unrecognised time '" + text + "'");
  }
  const std::string suffix(ampm);
  if (hour < 1 || hour > 12 || minute > 59 || second > 59 || (suffix != "AM" && suffix != "PM"))
    throw DataError("unrecognised time '" + text + "'");
  if (suffix == "AM" && hour == 12) hour = 0;
  if (suffix == "PM" && hour != 12) hour += 12;
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                        std::chrono::day{day}};
  if (!ymd.ok()) throw DataError("invalid date '" + text + "'");
  const auto days = std::chrono::sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + hour * 3600 + minute * 60 + second;
}

// --- MIND ------------------------------------------------------------------

InteractionLog parse_mind(std::istream& in, ParseStats* stats) {
  InteractionLog log;
  std::unordered_map<std::string, std::string> last_history;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 5) throw DataError("MIND: expected 5 tab-separated fields" + at_line(line_no));
    const std::string& user = fields[1];
    if (user.empty()) throw DataError("MIND: empty user id" + at_line(line_no));
    std::int64_t time = 0;
    try {
      time = parse_mind_time(fields[2]);
    } catch (const DataError& e) {
      throw DataError(std::string("MIND: ") + e.what() + at_line(line_no));
    }

    const auto history = split_ws(fields[3]);
    auto& previous = last_history[user];
    if (!history.empty() && fields[3] != previous) {
      const auto h = static_cast<std::int64_t>(history.size());
      for (std::int64_t j = 0; j < h; ++j) log.add_click(user, history[j], time - (h - j));
      previous = fields[3];
    }

    std::vector<std::string> slate;
    std::vector<std::string> clicked;
    for (const std::string& entry : split_ws(fields[4])) {
      const auto dash = entry.rfind('-');
      if (dash == std::string::npos || dash == 0 || dash + 2 != entry.size())
        throw DataError("MIND: malformed impression entry '" + entry + "'" + at_line(line_no));
      const char label = entry.back();
      if (label != '0' && label != '1')
        throw DataError("MIND: unknown impression suffix in '" + entry + "'" + at_line(line_no));
      std::string item = entry.substr(0, dash);
      if (label == '1') clicked.push_back(item);
      slate.push_back(std::move(item));
    }
    if (slate.empty()) throw DataError("MIND: empty impression list" + at_line(line_no));
    log.add_impression(user, std::move(slate), time);
    for (std::string& item : clicked) log.add_click(user, std::move(item), time);
  }
  if (stats) stats->lines = line_no;
  log.finalize();
  return log;
}

InteractionLog parse_mind(const std::filesystem::path& path, ParseStats* stats) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_mind(in, stats);
}

// --- Zhihu -----------------------------------------------------------------

InteractionLog parse_zhihu(std::istream& in, ParseStats* stats) {
  struct Pending {
    std::string user;
    std::int64_t show_time;
    std::vector<std::string> items;
  };
  // Slates keyed by (user, show_time) in first-appearance order.
  std::vector<Pending> slates;
  std::map<std::pair<std::string, std::int64_t>, std::size_t> slate_index;
  std::vector<std::tuple<std::string, std::string, std::int64_t>> clicks;
  std::vector<std::string> user_order;
  std::unordered_map<std::string, bool> seen_user;

  ParseStats local;
  std::string line;
  while (std::getline(in, line)) {
    ++local.lines;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() < 4) throw DataError("Zhihu: expected 4 tab-separated fields" + at_line(local.lines));
    std::int64_t show = 0, click = 0;
    if (!parse_int(fields[2], show) || !parse_int(fields[3], click))
      throw DataError("Zhihu: non-integer time" + at_line(local.lines));
    if (fields[0].empty() || fields[1].empty())
      throw DataError("Zhihu: empty user or item id" + at_line(local.lines));
    if (click != 0 && click < show) {
      ++local.rejected;
      continue;
    }
    if (!seen_user[fields[0]]) {
      seen_user[fields[0]] = true;
      user_order.push_back(fields[0]);
    }
    auto [it, inserted] = slate_index.try_emplace({fields[0], show}, slates.size());
    if (inserted) slates.push_back(Pending{fields[0], show, {}});
    slates[it->second].items.push_back(fields[1]);
    if (click != 0) clicks.emplace_back(fields[0], fields[1], click);
  }

  InteractionLog log;
  // Register users in file order so the log's user order is deterministic.
  std::unordered_map<std::string, std::vector<Event>> events;
  for (Pending& s : slates)
    events[s.user].push_back(Event{EventKind::Impression, std::move(s.items), s.show_time});
  for (auto& [user, item, time] : clicks)
    events[user].push_back(Event{EventKind::Click, {std::move(item)}, time});
  for (const std::string& user : user_order) {
    for (Event& e : events[user]) {
      if (e.kind == EventKind::Click)
        log.add_click(user, std::move(e.items.front()), e.timestamp);
      else
        log.add_impression(user, std::move(e.items), e.timestamp);
    }
  }
  log.finalize();
  if (stats) *stats = local;
  return log;
}

InteractionLog parse_zhihu(const std::filesystem::path& path, ParseStats* stats) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_zhihu(in, stats);
}

// --- synthetic -------------------------------------------------------------

void SyntheticConfig::validate() const {
  if (n_users < 1) throw ConfigError("synthetic: n_users must be >= 1");
  if (M < 1 || N < 1) throw ConfigError("synthetic: M and N must be >= 1");
  if (n_items <= N) throw ConfigError("synthetic: n_items must exceed N");
  if (n_slates_per_user < 1) throw ConfigError("synthetic: n_slates_per_user must be >= 1");
  if (!(signal_strength >= 0.0 && signal_strength <= 1.0))
    throw ConfigError("synthetic: signal_strength must lie in [0, 1]");
  if (transition_graph_degree < 1 || transition_graph_degree >= n_items)
    throw ConfigError("synthetic: transition_graph_degree must lie in [1, n_items)");
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const int n = cfg.n_items;

  SyntheticCorpus corpus;
  corpus.neighbors.assign(static_cast<std::size_t>(n), {});
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int g = 0; g < cfg.transition_graph_degree; ++g) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int i = 0; i < n; ++i)
      corpus.neighbors[static_cast<std::size_t>(order[i])].push_back(order[(i + 1) % n]);
  }

  auto id = [](int k) { return "i" + std::to_string(k); };
  std::uniform_int_distribution<int> any_item(0, n - 1);
  std::uniform_int_distribution<int> any_neighbor(0, cfg.transition_graph_degree - 1);
  std::uniform_int_distribution<int> any_recent(0, cfg.M - 1);
  std::bernoulli_distribution signal(cfg.signal_strength);

  for (int u = 0; u < cfg.n_users; ++u) {
    const std::string user = "u" + std::to_string(u);
    std::vector<int> clicks;
    std::int64_t t = 0;
    int current = any_item(rng);
    auto click = [&] {
      clicks.push_back(current);
      corpus.log.add_click(user, id(current), ++t);
      current = corpus.neighbors[static_cast<std::size_t>(current)]
                                [static_cast<std::size_t>(any_neighbor(rng))];
    };
    for (int j = 0; j < cfg.M; ++j) click();
    for (int s = 0; s < cfg.n_slates_per_user; ++s) {
      std::vector<std::string> slate;
      slate.reserve(static_cast<std::size_t>(cfg.N));
      for (int p = 0; p < cfg.N; ++p) {
        if (signal(rng)) {
          const int recent = clicks[clicks.size() - 1 - static_cast<std::size_t>(any_recent(rng))];
          slate.push_back(id(corpus.neighbors[static_cast<std::size_t>(recent)]
                                             [static_cast<std::size_t>(any_neighbor(rng))]));
        } else {
          slate.push_back(id(any_item(rng)));
        }
      }
      corpus.log.add_impression(user, std::move(slate), ++t);
      click();
    }
  }
  corpus.log.finalize();
  return corpus;
}

InteractionLog generate_synthetic(const SyntheticConfig& cfg) {
  return generate_synthetic_corpus(cfg).log;
}

}  // namespace leakaudit
