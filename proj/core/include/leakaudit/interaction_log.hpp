#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace leakaudit {

enum class EventKind { Click, Impression };

struct Event {
  EventKind kind = EventKind::Click;
  std::vector<std::string> items;  // one item for clicks, >= 1 for impressions
  std::int64_t timestamp = 0;
};

struct UserLog {
  std::string user;
  std::vector<Event> events;  // sorted by timestamp (stable)
};

// Per-user event streams in first-appearance order of users.
class InteractionLog {
 public:
  void add_click(const std::string& user, std::string item, std::int64_t timestamp);
  void add_impression(const std::string& user, std::vector<std::string> items,
                      std::int64_t timestamp);

  // Stable-sorts each user's events by timestamp. Called by the parsers.
  void finalize();

  const std::vector<UserLog>& users() const { return users_; }
  const UserLog* find(const std::string& user) const;
  bool empty() const { return users_.empty(); }
  std::size_t num_clicks() const;
  std::size_t num_impression_events() const;
  // Total exposed items over every impression event.
  std::size_t num_impressed_items() const;

 private:
  UserLog& user_log(const std::string& user);

  std::vector<UserLog> users_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace leakaudit
