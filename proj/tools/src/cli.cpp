#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "leakaudit/checkpoint.hpp"
#include "leakaudit/config.hpp"
#include "leakaudit/datamodel.hpp"
#include "leakaudit/error.hpp"
#include "leakaudit/hash.hpp"
#include "leakaudit/ingestion.hpp"
#include "leakaudit/metrics.hpp"
#include "leakaudit/model.hpp"
#include "leakaudit/plot.hpp"
#include "leakaudit/protection.hpp"
#include "leakaudit/training.hpp"

namespace fs = std::filesystem;

namespace leakaudit::cli {

namespace {

constexpr const char* kCheckpointFile = "checkpoint.bin";
constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kVocabFile = "vocab.tsv";
constexpr const char* kClicksFile = "user_clicks.tsv";

struct PrepareArgs {
  std::string format;
  std::string input;
  std::string out;
  int M = 5;
  int N = 10;
  std::uint64_t seed = 1;
  SyntheticConfig synthetic;
};

struct TrainArgs {
  std::string config;
  bool force = false;
  bool deterministic = false;
  bool quiet = false;
};

struct EvalArgs {
  std::string model_dir;
  std::string test;
  std::string vocab;
  std::vector<int> ks{5, 10, 20};
  std::string out;
  std::string per_example;
  std::string mrr = "per_item";
  int batch_size = 400;
};

struct ProtectArgs {
  std::string model_dir;
  std::string test;
  std::string train;
  std::string vocab;
  std::string clicks;
  std::string embeddings;
  std::string out;
  std::vector<double> levels{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<std::string> selections{"random", "similarity"};
  std::vector<std::string> replacements{"uniform", "overall_pop", "in_batch_pop"};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<int> ks{10};
  std::string accuracy = "full";
  bool inverted = false;
  int batch_size = 400;
};

struct PlotArgs {
  std::string csv;
  std::string out;
  int k = 10;
};

fs::path sibling(const std::string& explicit_path, const std::string& anchor, const char* name) {
  if (!explicit_path.empty()) return explicit_path;
  return fs::path(anchor).parent_path() / name;
}

void require_file(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) throw DataError(std::string(what) + " not found: " + path.string());
}

void write_user_clicks(const fs::path& path, const InteractionLog& log, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const UserLog& user : log.users()) {
    std::vector<int> items;
    for (const Event& e : user.events)
      if (e.kind == EventKind::Click && vocab.contains(e.items.front()))
        items.push_back(vocab.index_of(e.items.front()));
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    out << user.user << '\t';
    for (std::size_t i = 0; i < items.size(); ++i) out << (i ? "," : "") << items[i];
    out << '\n';
  }
}

std::map<std::string, std::unordered_set<int>> read_user_clicks(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::map<std::string, std::unordered_set<int>> clicks;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("malformed click file line: " + line);
    auto& set = clicks[line.substr(0, tab)];
    std::stringstream ss(line.substr(tab + 1));
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) set.insert(std::stoi(item));
  }
  return clicks;
}

int cmd_prepare(const PrepareArgs& a, std::ostream& out) {
  InteractionLog log;
  ParseStats stats;
  if (a.format == "synthetic") {
    SyntheticConfig cfg = a.synthetic;
    cfg.M = a.M;
    cfg.N = a.N;
    cfg.seed = a.seed;
    log = generate_synthetic(cfg);
  } else {
    if (a.input.empty()) throw ConfigError("--in is required for format " + a.format);
    require_file(a.input, "input file");
    log = a.format == "mind" ? parse_mind(fs::path(a.input), &stats) : parse_zhihu(fs::path(a.input), &stats);
  }
  const Vocabulary vocab = build_vocabulary(log);
  const auto examples = build_examples(log, vocab, a.M, a.N);
  if (examples.empty()) throw DataError("no example has M clicks before an N-item slate");
  const DatasetSplit split = split_by_user(examples, SplitRatios{}, a.seed);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  vocab.save(dir / kVocabFile);
  save_examples(dir / "train.tsv", split.train);
  save_examples(dir / "valid.tsv", split.valid);
  save_examples(dir / "test.tsv", split.test);
  write_user_clicks(dir / kClicksFile, log, vocab);
  out << "items " << vocab.num_items() << ", examples " << examples.size() << " (train "
      << split.train.size() << ", valid " << split.valid.size() << ", test " << split.test.size() << ")";
  if (stats.rejected) out << ", rejected records " << stats.rejected;
  out << '\n';
  return kOk;
}

ModelSpec spec_from(const ExperimentConfig& cfg, int num_items) {
  ModelSpec spec;
  spec.encoder = cfg.encoder;
  spec.decoder = cfg.decoder;
  spec.num_items = num_items;
  spec.M = cfg.attack.M;
  spec.N = cfg.attack.N;
  spec.d = cfg.attack.d;
  spec.heads = cfg.attack.heads;
  spec.dropout = cfg.attack.dropout;
  spec.activation = cfg.activation;
  spec.epsilon = cfg.attack.epsilon;
  spec.sequence_label_smoothing = cfg.sequence_label_smoothing;
  return spec;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const ExperimentConfig cfg = load_experiment_config(a.config);
  if (cfg.data_dir.empty()) throw ConfigError("invalid configuration:\n  data_dir: required");
  if (cfg.output_dir.empty()) throw ConfigError("invalid configuration:\n  output_dir: required");
  const fs::path dir = cfg.output_dir;
  if (fs::exists(dir) && !fs::is_empty(dir) && !a.force)
    throw ConfigError("output directory " + dir.string() + " is not empty; pass --force to overwrite");

  const Vocabulary vocab = Vocabulary::load(cfg.data_dir / kVocabFile);
  DatasetSplit split;
  split.train = load_examples(cfg.data_dir / "train.tsv");
  split.valid = load_examples(cfg.data_dir / "valid.tsv");

  TrainOptions options;
  options.config = cfg.attack;
  options.max_epochs = cfg.max_epochs;
  options.patience = cfg.patience;
  if (!a.quiet)
    options.on_epoch = [&](const EpochLog& e) {
      out << "epoch " << e.epoch << " loss " << e.train_loss << " valid recall@10 "
          << e.valid_recall_at_10 << " (" << e.wall_seconds << " s)\n";
    };
  // Training is single-threaded, so --deterministic only documents intent.
  TrainResult result = train(spec_from(cfg, vocab.num_items()), split, options);

  fs::create_directories(dir);
  save_checkpoint(dir / kCheckpointFile, result.model->parameters());
  ModelManifest manifest;
  manifest.spec = result.model->spec();
  manifest.vocab_fingerprint = vocab.fingerprint();
  manifest.seed = cfg.attack.seed;
  manifest.checkpoint_hash = to_hex(hash_file(dir / kCheckpointFile));
  save_manifest(dir / kManifestFile, manifest);
  {
    std::ofstream log(dir / "train_log.csv", std::ios::binary);
    log << "# adam beta1=" << result.adam.beta1 << " beta2=" << result.adam.beta2
        << " eps=" << result.adam.epsilon << " lr=" << result.adam.learning_rate
        << " best_epoch=" << result.best_epoch << '\n';
    write_training_log(log, result.log);
  }
  {
    std::ofstream copy(dir / "config.txt", std::ios::binary);
    write_experiment_config(copy, cfg);
  }
  out << "best epoch " << result.best_epoch << " valid recall@10 " << result.best_valid_recall
      << "\ncheckpoint " << (dir / kCheckpointFile).string() << " hash " << manifest.checkpoint_hash << '\n';
  return kOk;
}

std::unique_ptr<AttackModel> load_model(const fs::path& dir, const Vocabulary& vocab) {
  require_file(dir / kManifestFile, "manifest");
  require_file(dir / kCheckpointFile, "checkpoint");
  const ModelManifest manifest = load_manifest(dir / kManifestFile);
  if (manifest.vocab_fingerprint != vocab.fingerprint())
    throw DataError("vocabulary mismatch: checkpoint was trained on vocabulary " +
                    to_hex(manifest.vocab_fingerprint) + ", data uses " + to_hex(vocab.fingerprint()));
  auto model = std::make_unique<AttackModel>(manifest.spec, manifest.seed);
  load_checkpoint(dir / kCheckpointFile, model->parameters());
  return model;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  require_file(a.test, "test file");
  const Vocabulary vocab = Vocabulary::load(sibling(a.vocab, a.test, kVocabFile));
  const auto model = load_model(a.model_dir, vocab);
  EvaluateOptions options;
  options.ks = a.ks;
  options.batch_size = a.batch_size;
  options.mrr_mode = a.mrr == "first_hit" ? MrrMode::FirstHit : MrrMode::PerItem;
  options.keep_per_example = !a.per_example.empty();
  const MetricsReport report = evaluate(*model, load_examples(a.test), options);
  if (a.out.empty()) {
    write_metrics_csv(out, report);
  } else {
    std::ofstream file(a.out, std::ios::binary);
    if (!file) throw DataError("cannot write " + a.out);
    write_metrics_csv(file, report);
  }
  if (!a.per_example.empty()) {
    std::ofstream file(a.per_example, std::ios::binary);
    if (!file) throw DataError("cannot write " + a.per_example);
    write_per_example_csv(file, report);
  }
  return kOk;
}

int cmd_protect(const ProtectArgs& a, std::ostream& out) {
  require_file(a.test, "test file");
  const Vocabulary vocab = Vocabulary::load(sibling(a.vocab, a.test, kVocabFile));
  const auto model = load_model(a.model_dir, vocab);

  ProtectionOptions options;
  options.levels = a.levels;
  options.seeds = a.seeds;
  options.ks = a.ks;
  options.batch_size = a.batch_size;
  options.inverted_similarity = a.inverted;
  options.accuracy_scope = a.accuracy == "window" ? AccuracyScope::Window : AccuracyScope::FullHistory;
  options.selections.clear();
  for (const auto& s : a.selections) options.selections.push_back(parse_selection_kind(s));
  options.replacements.clear();
  for (const auto& r : a.replacements) options.replacements.push_back(parse_replacement_kind(r));

  const bool needs_overall = std::count(options.replacements.begin(), options.replacements.end(),
                                        ReplacementKind::OverallPopularity) > 0;
  if (needs_overall) {
    const fs::path train = sibling(a.train, a.test, "train.tsv");
    require_file(train, "training file (overall popularity)");
    options.popularity = PopularityModel::from_impressions(load_examples(train), vocab.num_items());
  }
  if (!a.embeddings.empty()) options.embeddings = EmbeddingProvider::load(a.embeddings, vocab);
  const fs::path clicks = sibling(a.clicks, a.test, kClicksFile);
  if (options.accuracy_scope == AccuracyScope::FullHistory && fs::is_regular_file(clicks))
    options.user_clicks = read_user_clicks(clicks);

  const ProtectionReport report = evaluate_protection(*model, load_examples(a.test), options);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  {
    std::ofstream csv(dir / "tradeoff.csv", std::ios::binary);
    if (!csv) throw DataError("cannot write " + (dir / "tradeoff.csv").string());
    write_protection_csv(csv, report);
  }
  std::ifstream csv(dir / "tradeoff.csv");
  const auto rows = read_protection_csv(csv);
  for (int k : a.ks) write_tradeoff_plots(rows, dir, k);
  out << "wrote " << report.rows.size() << " rows to " << (dir / "tradeoff.csv").string() << '\n';
  return kOk;
}

int cmd_plot(const PlotArgs& a, std::ostream& out) {
  require_file(a.csv, "trade-off CSV");
  std::ifstream in(a.csv);
  const auto rows = read_protection_csv(in);
  for (const auto& path : write_tradeoff_plots(rows, a.out, a.k)) out << path.string() << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"leakaudit: exposure-data leakage attacks and protection"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Build vocabulary and train/valid/test example files");
  prepare->add_option("--format", prep.format, "synthetic | mind | zhihu")
      ->required()
      ->check(CLI::IsMember({"synthetic", "mind", "zhihu"}));
  prepare->add_option("--in", prep.input, "Input log file (mind, zhihu)");
  prepare->add_option("--out", prep.out, "Output directory")->required();
  prepare->add_option("--M", prep.M, "Behavior sequence length")->capture_default_str();
  prepare->add_option("--N", prep.N, "Exposure slate length")->capture_default_str();
  prepare->add_option("--seed", prep.seed, "Split and generator seed")->capture_default_str();
  prepare->add_option("--n-users", prep.synthetic.n_users)->capture_default_str();
  prepare->add_option("--n-items", prep.synthetic.n_items)->capture_default_str();
  prepare->add_option("--slates-per-user", prep.synthetic.n_slates_per_user)->capture_default_str();
  prepare->add_option("--rho", prep.synthetic.signal_strength, "Planted signal strength")->capture_default_str();
  prepare->add_option("--degree", prep.synthetic.transition_graph_degree)->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train an attack model from a config file");
  train_cmd->add_option("--config", tr.config, "key = value config file")->required();
  train_cmd->add_flag("--force", tr.force, "Overwrite a non-empty output directory");
  train_cmd->add_flag("--deterministic", tr.deterministic, "Single-worker reproducible run");
  train_cmd->add_flag("--quiet", tr.quiet, "No per-epoch progress");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Attack metrics of a trained model on a test file");
  eval_cmd->add_option("--model", ev.model_dir, "Directory with checkpoint.bin and manifest.json")->required();
  eval_cmd->add_option("--test", ev.test, "Test examples")->required();
  eval_cmd->add_option("--vocab", ev.vocab, "Vocabulary (default: next to the test file)");
  eval_cmd->add_option("--ks", ev.ks, "Cut-offs")->delimiter(',')->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Metrics CSV (default: stdout)");
  eval_cmd->add_option("--per-example", ev.per_example, "Per-example metrics CSV");
  eval_cmd->add_option("--mrr", ev.mrr, "per_item | first_hit")
      ->check(CLI::IsMember({"per_item", "first_hit"}))
      ->capture_default_str();
  eval_cmd->add_option("--batch-size", ev.batch_size)->capture_default_str();

  ProtectArgs pr;
  auto* protect = app.add_subcommand("protect", "Protection sweep: trade-off CSV and plots");
  protect->add_option("--model", pr.model_dir, "Directory with checkpoint.bin and manifest.json")->required();
  protect->add_option("--test", pr.test, "Test examples")->required();
  protect->add_option("--train", pr.train, "Training examples for overall popularity");
  protect->add_option("--vocab", pr.vocab, "Vocabulary (default: next to the test file)");
  protect->add_option("--clicks", pr.clicks, "Per-user click sets (default: next to the test file)");
  protect->add_option("--embeddings", pr.embeddings, "External item embeddings: item_id v1 .. vd");
  protect->add_option("--out", pr.out, "Output directory")->required();
  protect->add_option("--levels", pr.levels, "Replacement proportions L")->delimiter(',')->capture_default_str();
  protect->add_option("--selections", pr.selections)
      ->delimiter(',')
      ->check(CLI::IsMember({"random", "similarity"}))
      ->capture_default_str();
  protect->add_option("--replacements", pr.replacements)
      ->delimiter(',')
      ->check(CLI::IsMember({"uniform", "overall_pop", "in_batch_pop"}))
      ->capture_default_str();
  protect->add_option("--seeds", pr.seeds)->delimiter(',')->capture_default_str();
  protect->add_option("--ks", pr.ks)->delimiter(',')->capture_default_str();
  protect->add_option("--accuracy", pr.accuracy, "full | window")
      ->check(CLI::IsMember({"full", "window"}))
      ->capture_default_str();
  protect->add_flag("--inverted", pr.inverted, "Favour replacing similar positions");
  protect->add_option("--batch-size", pr.batch_size)->capture_default_str();

  PlotArgs pl;
  auto* plot = app.add_subcommand("plot", "Render plots from a trade-off CSV");
  plot->add_option("--csv", pl.csv)->required();
  plot->add_option("--out", pl.out)->required();
  plot->add_option("--k", pl.k)->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(prep, out);
    if (train_cmd->parsed()) return cmd_train(tr, out);
    if (eval_cmd->parsed()) return cmd_eval(ev, out);
    if (protect->parsed()) return cmd_protect(pr, out);
    if (plot->parsed()) return cmd_plot(pl, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace leakaudit::cli
