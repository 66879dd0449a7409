#pragma once

// Slate encoders. All three are order-free: mean and max pooling are
// permutation invariant, and the self-attention encoder uses no position
// embeddings, so it is permutation equivariant over slate items while its CLS
// summary is invariant.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "leakaudit/layers.hpp"

namespace leakaudit {

enum class EncoderKind { Mean, Max, Attention };

std::string_view to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view text);

struct EncodedExposure {
  Var summary;  // B x d: pooled vector or the CLS row
  // Rows the sequence decoders attend to, memory_len per example. For pooling
  // encoders this is the summary itself; for self-attention it is the full
  // encoder output with the CLS row first.
  Var memory;
  Eigen::Index memory_len = 1;
  // Self-attention weights, (B*heads*(N+1)) x (N+1); filled when requested.
  std::optional<Matrix> attention_weights;
};

// Row j of the result is table row slate[j]; throws DataError on a bad index.
Matrix embed_slate(std::span<const int> slate, const Matrix& table);

// Column-wise mean / max over the rows of E (N x d). Throw DataError when E
// has no rows.
Eigen::RowVectorXd encode_mean(const Matrix& E);
Eigen::RowVectorXd encode_max(const Matrix& E);

struct SelfAttentionParams {
  MultiHeadAttentionParams attention;
  LayerNormParams attention_norm;
  FeedForwardParams ffn;
  LayerNormParams ffn_norm;

  static SelfAttentionParams create(ParameterStore& store, const std::string& prefix, int d,
                                    int heads);
};

class Encoder {
 public:
  // Registers the encoder's parameters under "encoder.*".
  Encoder(EncoderKind kind, int d, int heads, ParameterStore& store);

  EncoderKind kind() const { return kind_; }

  // slate_embeddings: (B*N) x d, example-major. cls_embedding: 1 x d (used
  // only by the attention encoder).
  EncodedExposure encode(const Var& slate_embeddings, Eigen::Index N, const Var& cls_embedding,
                         const ForwardContext& ctx, bool keep_attention = false) const;

  const SelfAttentionParams* self_attention() const {
    return params_ ? &*params_ : nullptr;
  }

 private:
  EncoderKind kind_;
  std::optional<SelfAttentionParams> params_;
};

// Pre-norm block: E~ = E + drop(MHA(LN(E))); C = E~ + drop(FFN(LN(E~))).
// Input rows are (B*T) x d with T rows per example.
Var self_attention_block(const SelfAttentionParams& params, const Var& x, Eigen::Index T,
                         const ForwardContext& ctx, Matrix* weights = nullptr);

}  // namespace leakaudit
