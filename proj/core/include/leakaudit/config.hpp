#pragma once

// Flat "key = value" experiment configuration. Blank lines and lines starting
// with '#' are ignored; list values are comma-separated.
//
//   data_dir        directory written by `prepare` (train/valid/test/vocab)
//   output_dir      where `train` writes checkpoint, manifest and log
//   encoder         mean | max | attention
//   decoder         pointwise | lstm | gru | transformer
//   activation      tanh | identity | relu | sigmoid (point-wise head)
//   M, N, d, heads, batch_size, max_epochs, patience, seed
//   learning_rate, dropout, epsilon (<= 0 selects 1/|I|)
//   sequence_label_smoothing   true | false
//   ks              e.g. 5,10,20
//   levels          e.g. 0,0.2,0.4,0.6,0.8,1
//   selections      random,similarity
//   replacements    uniform,overall_pop,in_batch_pop
//   protect_seeds   e.g. 1,2,3

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "leakaudit/datamodel.hpp"
#include "leakaudit/decoders.hpp"
#include "leakaudit/encoders.hpp"
#include "leakaudit/protection.hpp"

namespace leakaudit {

struct ExperimentConfig {
  std::filesystem::path data_dir;
  std::filesystem::path output_dir;
  EncoderKind encoder = EncoderKind::Attention;
  DecoderKind decoder = DecoderKind::Transformer;
  Activation activation = Activation::Tanh;
  bool sequence_label_smoothing = false;
  AttackConfig attack;
  int max_epochs = 100;
  int patience = 5;
  std::vector<int> ks{5, 10, 20};
  std::vector<double> levels{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<SelectionKind> selections{SelectionKind::Random, SelectionKind::Similarity};
  std::vector<ReplacementKind> replacements{ReplacementKind::Uniform,
                                            ReplacementKind::OverallPopularity,
                                            ReplacementKind::InBatchPopularity};
  std::vector<std::uint64_t> protect_seeds{1, 2, 3};
};

// Collects every problem before throwing a single ConfigError whose message
// lists them one per line. Relative paths resolve against `base_dir`.
ExperimentConfig parse_experiment_config(std::istream& in, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Round-trips through parse_experiment_config.
void write_experiment_config(std::ostream& out, const ExperimentConfig& cfg);

}  // namespace leakaudit
