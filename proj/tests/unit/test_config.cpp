#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "leakaudit/config.hpp"
#include "leakaudit/error.hpp"
#include "test_support.hpp"

using namespace leakaudit;
namespace lt = leakaudit::testing;

namespace {

ExperimentConfig parse(const std::string& text, const std::filesystem::path& base = {}) {
  std::istringstream in(text);
  return parse_experiment_config(in, base);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

TEST(ExperimentConfig, DefaultsWhenEmpty) {
  const auto cfg = parse("# nothing here\n\n");
  EXPECT_EQ(cfg.encoder, EncoderKind::Attention);
  EXPECT_EQ(cfg.decoder, DecoderKind::Transformer);
  EXPECT_EQ(cfg.attack.M, 5);
  EXPECT_EQ(cfg.attack.N, 10);
  EXPECT_EQ(cfg.attack.d, 128);
  EXPECT_EQ(cfg.attack.batch_size, 400);
  EXPECT_DOUBLE_EQ(cfg.attack.learning_rate, 0.001);
  EXPECT_DOUBLE_EQ(cfg.attack.dropout, 0.1);
  EXPECT_EQ(cfg.attack.heads, 2);
  EXPECT_EQ(cfg.max_epochs, 100);
  EXPECT_EQ(cfg.patience, 5);
}

TEST(ExperimentConfig, ParsesEveryKey) {
  const auto cfg = parse(
      "data_dir = data\n"
      "output_dir = /abs/out\n"
      "encoder = max\n"
      "decoder = gru\n"
      "activation = relu\n"
      "sequence_label_smoothing = true\n"
      "M = 4\nN = 8\nd = 32\nheads = 4\nbatch_size = 64\n"
      "learning_rate = 0.005\ndropout = 0.2\nepsilon = 0.01\nseed = 9\n"
      "max_epochs = 7\npatience = 3\n"
      "ks = 1, 5\n"
      "levels = 0,0.5\n"
      "selections = similarity\n"
      "replacements = in_batch_pop,uniform\n"
      "protect_seeds = 4,5,6,7\n",
      "/base");
  EXPECT_EQ(cfg.data_dir, std::filesystem::path("/base/data"));
  EXPECT_EQ(cfg.output_dir, std::filesystem::path("/abs/out"));
  EXPECT_EQ(cfg.encoder, EncoderKind::Max);
  EXPECT_EQ(cfg.decoder, DecoderKind::Gru);
  EXPECT_EQ(cfg.activation, Activation::Relu);
  EXPECT_TRUE(cfg.sequence_label_smoothing);
  EXPECT_EQ(cfg.attack.M, 4);
  EXPECT_EQ(cfg.attack.heads, 4);
  EXPECT_EQ(cfg.attack.seed, 9u);
  EXPECT_DOUBLE_EQ(cfg.attack.epsilon, 0.01);
  EXPECT_EQ(cfg.ks, (std::vector<int>{1, 5}));
  EXPECT_EQ(cfg.levels, (std::vector<double>{0.0, 0.5}));
  EXPECT_EQ(cfg.selections, (std::vector<SelectionKind>{SelectionKind::Similarity}));
  EXPECT_EQ(cfg.replacements,
            (std::vector<ReplacementKind>{ReplacementKind::InBatchPopularity, ReplacementKind::Uniform}));
  EXPECT_EQ(cfg.protect_seeds, (std::vector<std::uint64_t>{4, 5, 6, 7}));
}

TEST(ExperimentConfig, CollectsAllErrors) {
  const std::string msg = error_of(
      "encoder = lstm\n"
      "colour = blue\n"
      "M = 3\n"
      "M = 4\n"
      "dropout = 1.5\n"
      "levels = 0, 2\n"
      "just text\n");
  ASSERT_FALSE(msg.empty());
  EXPECT_NE(msg.find("invalid configuration"), std::string::npos);
  EXPECT_NE(msg.find("line 1"), std::string::npos);
  EXPECT_NE(msg.find("unknown key 'colour'"), std::string::npos);
  EXPECT_NE(msg.find("duplicate"), std::string::npos);
  EXPECT_NE(msg.find("dropout"), std::string::npos);
  EXPECT_NE(msg.find("levels"), std::string::npos);
  EXPECT_NE(msg.find("line 7"), std::string::npos);
}

TEST(ExperimentConfig, RejectsBadNumbers) {
  EXPECT_FALSE(error_of("M = five\n").empty());
  EXPECT_FALSE(error_of("heads = 3\n").empty());  // does not divide d = 128
  EXPECT_FALSE(error_of("ks = \n").empty());
  EXPECT_FALSE(error_of("patience = 0\n").empty());
}

TEST(ExperimentConfig, WriteParseRoundTrip) {
  ExperimentConfig cfg;
  cfg.data_dir = "/d";
  cfg.output_dir = "/o";
  cfg.encoder = EncoderKind::Mean;
  cfg.decoder = DecoderKind::Lstm;
  cfg.attack.learning_rate = 0.0003;
  cfg.attack.epsilon = 0.02;
  cfg.levels = {0.0, 0.3, 1.0};
  cfg.ks = {10};
  std::ostringstream out;
  write_experiment_config(out, cfg);
  const auto back = parse(out.str());
  std::ostringstream again;
  write_experiment_config(again, back);
  EXPECT_EQ(again.str(), out.str());
  EXPECT_EQ(back.attack.learning_rate, 0.0003);
  EXPECT_EQ(back.levels, cfg.levels);
}

TEST(ExperimentConfig, LoadResolvesAgainstFileDirectory) {
  const auto dir = lt::scratch_dir("config");
  {
    std::ofstream f(dir / "exp.cfg");
    f << "data_dir = data\noutput_dir = out\n";
  }
  const auto cfg = load_experiment_config(dir / "exp.cfg");
  EXPECT_EQ(cfg.data_dir, dir / "data");
  EXPECT_EQ(cfg.output_dir, dir / "out");
  EXPECT_THROW(load_experiment_config(dir / "missing.cfg"), ConfigError);
}

}  // namespace
