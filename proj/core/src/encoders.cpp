#include "leakaudit/encoders.hpp"

#include <array>
#include <cmath>
#include <numeric>

#include "leakaudit/error.hpp"

namespace leakaudit {

std::string_view to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::Mean: return "mean";
    case EncoderKind::Max: return "max";
    case EncoderKind::Attention: return "attention";
  }
  return "?";
}

EncoderKind parse_encoder_kind(std::string_view text) {
  if (text == "mean") return EncoderKind::Mean;
  if (text == "max") return EncoderKind::Max;
  if (text == "attention" || text == "att") return EncoderKind::Attention;
  throw ConfigError("unknown encoder kind '" + std::string(text) + "' (mean|max|attention)");
}

Matrix embed_slate(std::span<const int> slate, const Matrix& table) {
  Matrix out(static_cast<Eigen::Index>(slate.size()), table.cols());
  for (std::size_t j = 0; j < slate.size(); ++j) {
    if (slate[j] < 0 || slate[j] >= table.rows())
      throw DataError("embed_slate: index " + std::to_string(slate[j]) + " outside table");
    out.row(static_cast<Eigen::Index>(j)) = table.row(slate[j]);
  }
  return out;
}

Eigen::RowVectorXd encode_mean(const Matrix& E) {
  if (E.rows() == 0) throw DataError("encode_mean: empty slate");
  ag::NoGradGuard guard;
  return ag::segment_mean(ag::constant(E), E.rows()).value().row(0);
}

Eigen::RowVectorXd encode_max(const Matrix& E) {
  if (E.rows() == 0) throw DataError("encode_max: empty slate");
  ag::NoGradGuard guard;
  return ag::segment_max(ag::constant(E), E.rows()).value().row(0);
}

SelfAttentionParams SelfAttentionParams::create(ParameterStore& store, const std::string& prefix,
                                                int d, int heads) {
  SelfAttentionParams p;
  p.attention = MultiHeadAttentionParams::create(store, prefix + ".attention", d, heads);
  p.attention_norm = LayerNormParams::create(store, prefix + ".attention_norm", d);
  p.ffn = FeedForwardParams::create(store, prefix + ".ffn", d, d);
  p.ffn_norm = LayerNormParams::create(store, prefix + ".ffn_norm", d);
  return p;
}

Var self_attention_block(const SelfAttentionParams& params, const Var& x, Eigen::Index T,
                         const ForwardContext& ctx, Matrix* weights) {
  const Var normed = params.attention_norm(x);
  const Var attended = params.attention(normed, normed, T, T, /*causal=*/false, weights);
  const Var mixed = ag::add(x, ctx.maybe_dropout(attended));
  const Var transformed = params.ffn(params.ffn_norm(mixed));
  const Var out = ag::add(mixed, ctx.maybe_dropout(transformed));
  for (Eigen::Index i = 0; i < out.value().size(); ++i)
    if (!std::isfinite(out.value().data()[i]))
      throw NumericError("self-attention encoder produced a non-finite activation");
  return out;
}

Encoder::Encoder(EncoderKind kind, int d, int heads, ParameterStore& store) : kind_(kind) {
  if (kind == EncoderKind::Attention)
    params_ = SelfAttentionParams::create(store, "encoder.self_attention", d, heads);
}

EncodedExposure Encoder::encode(const Var& slate_embeddings, Eigen::Index N,
                                const Var& cls_embedding, const ForwardContext& ctx,
                                bool keep_attention) const {
  if (N <= 0 || slate_embeddings.rows() == 0 || slate_embeddings.rows() % N != 0)
    throw DataError("encoder: slate rows must be a positive multiple of N");
  EncodedExposure out;
  switch (kind_) {
    case EncoderKind::Mean:
      out.summary = ag::segment_mean(slate_embeddings, N);
      break;
    case EncoderKind::Max:
      out.summary = ag::segment_max(slate_embeddings, N);
      break;
    case EncoderKind::Attention: {
      const Eigen::Index batch = slate_embeddings.rows() / N;
      const Eigen::Index T = N + 1;
      // Row 0 of the stacked input is the CLS embedding; each example gets
      // [CLS, e_1..e_N].
      const std::array<Var, 2> parts{cls_embedding, slate_embeddings};
      const Var stacked = ag::concat_rows(parts);
      std::vector<int> order(static_cast<std::size_t>(batch * T));
      for (Eigen::Index b = 0; b < batch; ++b) {
        order[static_cast<std::size_t>(b * T)] = 0;
        for (Eigen::Index j = 0; j < N; ++j)
          order[static_cast<std::size_t>(b * T + 1 + j)] = static_cast<int>(1 + b * N + j);
      }
      const Var input = ag::gather_rows(stacked, order);
      Matrix weights;
      out.memory = self_attention_block(*params_, input, T, ctx, keep_attention ? &weights : nullptr);
      out.memory_len = T;
      std::vector<int> cls_rows(static_cast<std::size_t>(batch));
      for (Eigen::Index b = 0; b < batch; ++b) cls_rows[static_cast<std::size_t>(b)] = static_cast<int>(b * T);
      out.summary = ag::gather_rows(out.memory, cls_rows);
      if (keep_attention) out.attention_weights = std::move(weights);
      return out;
    }
  }
  out.memory = out.summary;
  out.memory_len = 1;
  return out;
}

}  // namespace leakaudit
