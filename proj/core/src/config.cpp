#include "leakaudit/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "leakaudit/error.hpp"

namespace leakaudit {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

template <typename T>
T parse_number(const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("expected a number, got '" + text + "'");
  return value;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("expected true or false, got '" + text + "'");
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& value, F parse_one) {
  std::vector<T> out;
  for (const std::string& item : split_list(value)) out.push_back(parse_one(item));
  return out;
}

std::string join(const auto& values, auto&& show) {
  std::ostringstream out;
  bool first = true;
  for (const auto& v : values) {
    out << (first ? "" : ",") << show(v);
    first = false;
  }
  return out.str();
}

}  // namespace

ExperimentConfig parse_experiment_config(std::istream& in, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  auto path_of = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  const std::map<std::string, std::function<void(const std::string&)>> setters{
      {"data_dir", [&](const std::string& v) { cfg.data_dir = path_of(v); }},
      {"output_dir", [&](const std::string& v) { cfg.output_dir = path_of(v); }},
      {"encoder", [&](const std::string& v) { cfg.encoder = parse_encoder_kind(v); }},
      {"decoder", [&](const std::string& v) { cfg.decoder = parse_decoder_kind(v); }},
      {"activation", [&](const std::string& v) { cfg.activation = parse_activation(v); }},
      {"sequence_label_smoothing", [&](const std::string& v) { cfg.sequence_label_smoothing = parse_bool(v); }},
      {"M", [&](const std::string& v) { cfg.attack.M = parse_number<int>(v); }},
      {"N", [&](const std::string& v) { cfg.attack.N = parse_number<int>(v); }},
      {"d", [&](const std::string& v) { cfg.attack.d = parse_number<int>(v); }},
      {"heads", [&](const std::string& v) { cfg.attack.heads = parse_number<int>(v); }},
      {"batch_size", [&](const std::string& v) { cfg.attack.batch_size = parse_number<int>(v); }},
      {"learning_rate", [&](const std::string& v) { cfg.attack.learning_rate = parse_number<double>(v); }},
      {"dropout", [&](const std::string& v) { cfg.attack.dropout = parse_number<double>(v); }},
      {"epsilon", [&](const std::string& v) { cfg.attack.epsilon = parse_number<double>(v); }},
      {"seed", [&](const std::string& v) { cfg.attack.seed = parse_number<std::uint64_t>(v); }},
      {"max_epochs", [&](const std::string& v) { cfg.max_epochs = parse_number<int>(v); }},
      {"patience", [&](const std::string& v) { cfg.patience = parse_number<int>(v); }},
      {"ks", [&](const std::string& v) { cfg.ks = parse_list<int>(v, parse_number<int>); }},
      {"levels", [&](const std::string& v) { cfg.levels = parse_list<double>(v, parse_number<double>); }},
      {"selections", [&](const std::string& v) {
         cfg.selections = parse_list<SelectionKind>(v, [](const std::string& s) { return parse_selection_kind(s); });
       }},
      {"replacements", [&](const std::string& v) {
         cfg.replacements = parse_list<ReplacementKind>(v, [](const std::string& s) { return parse_replacement_kind(s); });
       }},
      {"protect_seeds", [&](const std::string& v) {
         cfg.protect_seeds = parse_list<std::uint64_t>(v, parse_number<std::uint64_t>);
       }},
  };

  std::vector<std::string> errors;
  std::map<std::string, int> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) {
      errors.push_back(where + "expected key = value");
      continue;
    }
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    const auto setter = setters.find(key);
    if (setter == setters.end()) {
      errors.push_back(where + "unknown key '" + key + "'");
      continue;
    }
    if (seen.count(key)) {
      errors.push_back(where + key + ": duplicate (first set on line " + std::to_string(seen[key]) + ")");
      continue;
    }
    seen[key] = line_no;
    try {
      setter->second(value);
    } catch (const Error& e) {
      errors.push_back(where + key + ": " + e.what());
    }
  }

  auto check = [&](bool ok, const std::string& message) {
    if (!ok) errors.push_back(message);
  };
  try {
    cfg.attack.validate();
  } catch (const ConfigError& e) {
    errors.push_back(e.what());
  }
  check(cfg.max_epochs >= 1, "max_epochs: must be >= 1");
  check(cfg.patience >= 1, "patience: must be >= 1");
  for (int k : cfg.ks) check(k >= 1, "ks: every cut-off must be >= 1");
  for (double L : cfg.levels) check(L >= 0.0 && L <= 1.0, "levels: every L must lie in [0, 1]");

  if (!errors.empty()) {
    std::string message = "invalid configuration:";
    for (const auto& e : errors) message += "\n  " + e;
    throw ConfigError(message);
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_experiment_config(in, path.parent_path());
}

void write_experiment_config(std::ostream& out, const ExperimentConfig& cfg) {
  auto plain = [](const auto& v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  auto named = [](auto kind) { return std::string(to_string(kind)); };
  out.precision(17);
  if (!cfg.data_dir.empty()) out << "data_dir = " << cfg.data_dir.string() << '\n';
  if (!cfg.output_dir.empty()) out << "output_dir = " << cfg.output_dir.string() << '\n';
  out << "encoder = " << to_string(cfg.encoder) << '\n'
      << "decoder = " << to_string(cfg.decoder) << '\n'
      << "activation = " << to_string(cfg.activation) << '\n'
      << "sequence_label_smoothing = " << (cfg.sequence_label_smoothing ? "true" : "false") << '\n'
      << "M = " << cfg.attack.M << '\n'
      << "N = " << cfg.attack.N << '\n'
      << "d = " << cfg.attack.d << '\n'
      << "heads = " << cfg.attack.heads << '\n'
      << "batch_size = " << cfg.attack.batch_size << '\n'
      << "learning_rate = " << cfg.attack.learning_rate << '\n'
      << "dropout = " << cfg.attack.dropout << '\n'
      << "epsilon = " << cfg.attack.epsilon << '\n'
      << "seed = " << cfg.attack.seed << '\n'
      << "max_epochs = " << cfg.max_epochs << '\n'
      << "patience = " << cfg.patience << '\n'
      << "ks = " << join(cfg.ks, plain) << '\n'
      << "levels = " << join(cfg.levels, plain) << '\n'
      << "selections = " << join(cfg.selections, named) << '\n'
      << "replacements = " << join(cfg.replacements, named) << '\n'
      << "protect_seeds = " << join(cfg.protect_seeds, plain) << '\n';
}

}  // namespace leakaudit
