#pragma once

// Decoders that turn an encoded slate back into the user's past clicks:
// a point-wise multi-label head and three autoregressive sequence decoders
// (LSTM, GRU, transformer). Sequence decoders are trained on the reversed
// behavior with START/END tokens: input (START, b_M, ..., b_1), target
// (b_M, ..., b_1, END).

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "leakaudit/encoders.hpp"
#include "leakaudit/layers.hpp"

namespace leakaudit {

enum class DecoderKind { Pointwise, Lstm, Gru, Transformer };
std::string_view to_string(DecoderKind kind);
DecoderKind parse_decoder_kind(std::string_view text);

// Activation applied to the point-wise logits before the softmax.
enum class Activation { Tanh, Identity, Relu, Sigmoid };
std::string_view to_string(Activation act);
Activation parse_activation(std::string_view text);
Var apply_activation(Activation act, const Var& x);

// Label-smoothed multi-label target over num_items classes: behavior items
// share 1 - epsilon, everything else shares epsilon. A repeated click keeps
// its multiplicity, so the vector always sums to one.
Eigen::VectorXd smooth_labels(std::span<const int> behavior, double epsilon, int num_items);

// -sum_j y_j log q_j, with log clamped at 1e-12. `clamped` reports whether the
// clamp fired on a positive-weight label.
double pointwise_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& q, bool* clamped = nullptr);

// -sum_m log Q(m, targets[m]) with the same clamp.
double sequence_loss(const Matrix& Q, std::span<const int> targets, bool* clamped = nullptr);

// q = softmax(act(W_d^T c + b)); W_d is d x |I|, b has |I| entries.
Eigen::VectorXd pointwise_decode(const Eigen::RowVectorXd& c, const Matrix& W_d,
                                 const Eigen::RowVectorXd& b, Activation act);

// Point-wise logits: act(c W_d + b) where W_d is the transposed item table.
struct PointwiseHead {
  Var bias;  // 1 x |I|
  Activation activation = Activation::Tanh;

  Var logits(const Var& summary, const Var& item_table) const;
};

// Output layer shared by the sequence decoders: (h W + b) E_out^T + bias,
// with E_out the item-embedding rows of items and END (weight tying).
struct OutputHead {
  Var w, b, bias;

  static OutputHead create(ParameterStore& store, const std::string& prefix, int d,
                           int num_classes);
  Var logits(const Var& hidden, const Var& output_table) const;
};

// Intermediate values captured for tests; step-major lists of B x d.
struct DecoderTrace {
  std::vector<Matrix> hidden;
  std::vector<Matrix> cell;
  std::vector<Matrix> candidate;
  std::vector<Matrix> update_gate;
  Matrix self_attention;
  Matrix cross_attention;
};

class SequenceDecoder {
 public:
  virtual ~SequenceDecoder() = default;
  virtual DecoderKind kind() const = 0;
  // inputs: (B*T) x d example-major decoder input embeddings. Returns the
  // (B*T) x d hidden states, example-major. Position t only sees inputs <= t.
  virtual Var hidden(const EncodedExposure& encoded, const Var& inputs, Eigen::Index T,
                     const ForwardContext& ctx, DecoderTrace* trace = nullptr) const = 0;
};

struct LstmParams {
  Var w_i, w_f, w_g, w_o;  // 2d x d acting on [h; b]
  Var p_i, p_f, p_g, p_o;  // 1 x d

  static LstmParams create(ParameterStore& store, const std::string& prefix, int d);
};

struct GruParams {
  Var w_z, w_r, w_h;  // 2d x d
  Var p_z, p_r, p_h;  // 1 x d

  static GruParams create(ParameterStore& store, const std::string& prefix, int d);
};

class LstmDecoder final : public SequenceDecoder {
 public:
  explicit LstmDecoder(LstmParams params) : params_(std::move(params)) {}
  DecoderKind kind() const override { return DecoderKind::Lstm; }
  Var hidden(const EncodedExposure& encoded, const Var& inputs, Eigen::Index T,
             const ForwardContext& ctx, DecoderTrace* trace = nullptr) const override;
  const LstmParams& params() const { return params_; }

 private:
  LstmParams params_;
};

class GruDecoder final : public SequenceDecoder {
 public:
  explicit GruDecoder(GruParams params) : params_(std::move(params)) {}
  DecoderKind kind() const override { return DecoderKind::Gru; }
  Var hidden(const EncodedExposure& encoded, const Var& inputs, Eigen::Index T,
             const ForwardContext& ctx, DecoderTrace* trace = nullptr) const override;
  const GruParams& params() const { return params_; }

 private:
  GruParams params_;
};

struct TransformerDecoderParams {
  Var position_embedding;  // max_len x d
  MultiHeadAttentionParams self_attention;
  LayerNormParams self_norm;
  MultiHeadAttentionParams cross_attention;
  LayerNormParams cross_norm;
  FeedForwardParams ffn;
  LayerNormParams ffn_norm;

  static TransformerDecoderParams create(ParameterStore& store, const std::string& prefix, int d,
                                         int heads, int max_len);
};

// One pre-norm block: masked self-attention with learned positions, then
// cross-attention onto the encoder memory, then the feed-forward network.
class TransformerDecoder final : public SequenceDecoder {
 public:
  explicit TransformerDecoder(TransformerDecoderParams params) : params_(std::move(params)) {}
  DecoderKind kind() const override { return DecoderKind::Transformer; }
  Var hidden(const EncodedExposure& encoded, const Var& inputs, Eigen::Index T,
             const ForwardContext& ctx, DecoderTrace* trace = nullptr) const override;
  const TransformerDecoderParams& params() const { return params_; }

 private:
  TransformerDecoderParams params_;
};

// Teacher-forced decoder input and target for one behavior sequence
// (oldest -> newest).
std::vector<int> shifted_decoder_input(std::span<const int> behavior, int start_token);
std::vector<int> reversed_targets(std::span<const int> behavior, int end_token);

}  // namespace leakaudit
