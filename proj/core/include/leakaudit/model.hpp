#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leakaudit/datamodel.hpp"
#include "leakaudit/decoders.hpp"
#include "leakaudit/encoders.hpp"
#include "leakaudit/metrics.hpp"

namespace leakaudit {

struct ModelSpec {
  EncoderKind encoder = EncoderKind::Attention;
  DecoderKind decoder = DecoderKind::Transformer;
  int num_items = 0;
  int M = 5;
  int N = 10;
  int d = 128;
  int heads = 2;
  double dropout = 0.1;
  Activation activation = Activation::Tanh;
  double epsilon = 0.0;  // <= 0 selects 1/|I|
  bool sequence_label_smoothing = false;

  double effective_epsilon() const;
  void validate() const;
};

// A mini-batch of examples as flat index arrays, example-major.
struct Batch {
  Eigen::Index size = 0;
  std::vector<int> slates;     // size * N
  std::vector<int> behaviors;  // size * M, oldest -> newest

  static Batch from(std::span<const AttackExample* const> examples, int M, int N);
  static Batch from(std::span<const AttackExample> examples, int M, int N);
};

// Encoder-decoder attack model with the item table shared between the input
// embeddings and the output softmax.
class AttackModel {
 public:
  AttackModel(ModelSpec spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }

  // Mean per-example training loss over the batch.
  Var loss(const Batch& batch, const ForwardContext& ctx) const;

  EncodedExposure encode(std::span<const int> slates, const ForwardContext& ctx,
                         bool keep_attention = false) const;

  // Probabilities over classes: |I| items for point-wise, |I| items + END for
  // the teacher-forced sequence decoders ((B*(M+1)) rows, example-major).
  Matrix teacher_forced_probabilities(const Batch& batch) const;

  // Greedy inference, dropout off. Sequence decoders run M steps feeding back
  // the previous top-1 item; special tokens are never candidates.
  std::vector<RankedInference> infer(std::span<const int> slates) const;

  // Item rows only (|I| x d).
  Matrix item_embeddings() const;
  const Var& item_table() const { return item_table_; }
  const Encoder& encoder() const { return *encoder_; }
  const SequenceDecoder* sequence_decoder() const { return sequence_decoder_.get(); }

  int start_token() const { return spec_.num_items + 1; }
  int end_token() const { return spec_.num_items; }
  int cls_token() const { return spec_.num_items + 2; }

 private:
  Var output_logits(const EncodedExposure& encoded, std::span<const int> decoder_inputs,
                    Eigen::Index T, const ForwardContext& ctx) const;

  ModelSpec spec_;
  ParameterStore store_;
  Var item_table_;
  std::unique_ptr<Encoder> encoder_;
  PointwiseHead pointwise_;
  std::unique_ptr<SequenceDecoder> sequence_decoder_;
  OutputHead output_head_;
};

}  // namespace leakaudit
