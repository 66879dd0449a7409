#include "leakaudit/decoders.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "leakaudit/error.hpp"

namespace leakaudit {

namespace {

constexpr double kLogClamp = 1e-12;

// Reorders step-major rows (t*B + b) into example-major rows (b*T + t).
Var step_major_to_example_major(std::span<const Var> steps, Eigen::Index batch) {
  const Var stacked = ag::concat_rows(steps);
  const auto T = static_cast<Eigen::Index>(steps.size());
  std::vector<int> order(static_cast<std::size_t>(batch * T));
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index t = 0; t < T; ++t)
      order[static_cast<std::size_t>(b * T + t)] = static_cast<int>(t * batch + b);
  return ag::gather_rows(stacked, order);
}

// Rows b*T + t for a fixed t.
Var step_rows(const Var& inputs, Eigen::Index T, Eigen::Index t) {
  const Eigen::Index batch = inputs.rows() / T;
  std::vector<int> rows(static_cast<std::size_t>(batch));
  for (Eigen::Index b = 0; b < batch; ++b) rows[static_cast<std::size_t>(b)] = static_cast<int>(b * T + t);
  return ag::gather_rows(inputs, rows);
}

void check_decoder_shapes(const EncodedExposure& encoded, const Var& inputs, Eigen::Index T) {
  if (T <= 0 || inputs.rows() % T != 0)
    throw DataError("decoder: input rows must be a multiple of the sequence length");
  if (encoded.summary.rows() * T != inputs.rows())
    throw DataError("decoder: batch size of encoder output and decoder input differ");
  if (encoded.summary.cols() != inputs.cols())
    throw DataError("decoder: encoder and decoder widths differ");
}

}  // namespace

std::string_view to_string(DecoderKind kind) {
  switch (kind) {
    case DecoderKind::Pointwise: return "pointwise";
    case DecoderKind::Lstm: return "lstm";
    case DecoderKind::Gru: return "gru";
    case DecoderKind::Transformer: return "transformer";
  }
  return "?";
}

DecoderKind parse_decoder_kind(std::string_view text) {
  if (text == "pointwise") return DecoderKind::Pointwise;
  if (text == "lstm") return DecoderKind::Lstm;
  if (text == "gru") return DecoderKind::Gru;
  if (text == "transformer") return DecoderKind::Transformer;
  throw ConfigError("unknown decoder kind '" + std::string(text) +
                    "' (pointwise|lstm|gru|transformer)");
}

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

Activation parse_activation(std::string_view text) {
  if (text == "tanh") return Activation::Tanh;
  if (text == "identity") return Activation::Identity;
  if (text == "relu") return Activation::Relu;
  if (text == "sigmoid") return Activation::Sigmoid;
  throw ConfigError("unknown activation '" + std::string(text) + "'");
}

Var apply_activation(Activation act, const Var& x) {
  switch (act) {
    case Activation::Tanh: return ag::tanh(x);
    case Activation::Relu: return ag::relu(x);
    case Activation::Sigmoid: return ag::sigmoid(x);
    case Activation::Identity: break;
  }
  return x;
}

Eigen::VectorXd smooth_labels(std::span<const int> behavior, double epsilon, int num_items) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("smooth_labels: epsilon must lie in (0, 1)");
  if (behavior.empty()) throw DataError("smooth_labels: empty behavior sequence");
  std::map<int, int> counts;
  for (int item : behavior) {
    if (item < 0 || item >= num_items) throw DataError("smooth_labels: behavior item out of range");
    ++counts[item];
  }
  const auto M = static_cast<double>(behavior.size());
  const auto distinct = static_cast<int>(counts.size());
  if (static_cast<int>(behavior.size()) >= num_items || distinct >= num_items)
    throw DataError("smooth_labels: M must be smaller than |I|");
  Eigen::VectorXd y = Eigen::VectorXd::Constant(num_items, epsilon / (num_items - distinct));
  for (const auto& [item, count] : counts) y(item) = (1.0 - epsilon) * count / M;
  return y;
}

double pointwise_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& q, bool* clamped) {
  if (y.size() != q.size()) throw DataError("pointwise_loss: length mismatch");
  double loss = 0.0;
  bool hit = false;
  for (Eigen::Index j = 0; j < y.size(); ++j) {
    if (y(j) == 0.0) continue;
    if (q(j) < kLogClamp) hit = true;
    loss -= y(j) * std::log(std::max(q(j), kLogClamp));
  }
  if (clamped) *clamped = hit;
  return loss;
}

double sequence_loss(const Matrix& Q, std::span<const int> targets, bool* clamped) {
  if (static_cast<Eigen::Index>(targets.size()) != Q.rows())
    throw DataError("sequence_loss: one target per row required");
  double loss = 0.0;
  bool hit = false;
  for (Eigen::Index m = 0; m < Q.rows(); ++m) {
    const int t = targets[static_cast<std::size_t>(m)];
    if (t < 0 || t >= Q.cols()) throw DataError("sequence_loss: target out of range");
    const double q = Q(m, t);
    if (q < kLogClamp) hit = true;
    loss -= std::log(std::max(q, kLogClamp));
  }
  if (clamped) *clamped = hit;
  return loss;
}

Eigen::VectorXd pointwise_decode(const Eigen::RowVectorXd& c, const Matrix& W_d,
                                 const Eigen::RowVectorXd& b, Activation act) {
  if (W_d.rows() != c.size() || W_d.cols() != b.size())
    throw DataError("pointwise_decode: shape mismatch");
  ag::NoGradGuard guard;
  Matrix logits = c * W_d + b;
  const Var activated = apply_activation(act, ag::constant(std::move(logits)));
  return ag::softmax_rows(activated.value()).row(0).transpose();
}

Var PointwiseHead::logits(const Var& summary, const Var& item_table) const {
  return apply_activation(activation, ag::add_row(ag::matmul_nt(summary, item_table), bias));
}

OutputHead OutputHead::create(ParameterStore& store, const std::string& prefix, int d,
                              int num_classes) {
  OutputHead head;
  head.w = store.add_uniform(prefix + ".w", d, d, d);
  head.b = store.add_constant(prefix + ".b", 1, d, 0.0);
  head.bias = store.add_constant(prefix + ".bias", 1, num_classes, 0.0);
  return head;
}

Var OutputHead::logits(const Var& hidden, const Var& output_table) const {
  const Var projected = ag::add_row(ag::matmul(hidden, w), b);
  return ag::add_row(ag::matmul_nt(projected, output_table), bias);
}

LstmParams LstmParams::create(ParameterStore& store, const std::string& prefix, int d) {
  LstmParams p;
  p.w_i = store.add_uniform(prefix + ".w_i", 2 * d, d, d);
  p.w_f = store.add_uniform(prefix + ".w_f", 2 * d, d, d);
  p.w_g = store.add_uniform(prefix + ".w_g", 2 * d, d, d);
  p.w_o = store.add_uniform(prefix + ".w_o", 2 * d, d, d);
  p.p_i = store.add_constant(prefix + ".p_i", 1, d, 0.0);
  p.p_f = store.add_constant(prefix + ".p_f", 1, d, 0.0);
  p.p_g = store.add_constant(prefix + ".p_g", 1, d, 0.0);
  p.p_o = store.add_constant(prefix + ".p_o", 1, d, 0.0);
  return p;
}

GruParams GruParams::create(ParameterStore& store, const std::string& prefix, int d) {
  GruParams p;
  p.w_z = store.add_uniform(prefix + ".w_z", 2 * d, d, d);
  p.w_r = store.add_uniform(prefix + ".w_r", 2 * d, d, d);
  p.w_h = store.add_uniform(prefix + ".w_h", 2 * d, d, d);
  p.p_z = store.add_constant(prefix + ".p_z", 1, d, 0.0);
  p.p_r = store.add_constant(prefix + ".p_r", 1, d, 0.0);
  p.p_h = store.add_constant(prefix + ".p_h", 1, d, 0.0);
  return p;
}

Var LstmDecoder::hidden(const EncodedExposure& encoded, const Var& inputs, Eigen::Index T,
                        const ForwardContext& ctx, DecoderTrace* trace) const {
  check_decoder_shapes(encoded, inputs, T);
  const auto& p = params_;
  Var h = encoded.summary;
  Var g = encoded.summary;
  std::vector<Var> outputs;
  for (Eigen::Index t = 0; t < T; ++t) {
    const Var x = ag::concat_cols(h, step_rows(inputs, T, t));
    const Var i = ag::sigmoid(ag::add_row(ag::matmul(x, p.w_i), p.p_i));
    const Var f = ag::sigmoid(ag::add_row(ag::matmul(x, p.w_f), p.p_f));
    const Var g_tilde = ag::tanh(ag::add_row(ag::matmul(x, p.w_g), p.p_g));
    g = ag::add(ag::mul(i, g_tilde), ag::mul(f, g));
    const Var o = ag::sigmoid(ag::add_row(ag::matmul(x, p.w_o), p.p_o));
    h = ag::mul(o, ag::tanh(g));
    if (trace) {
      trace->hidden.push_back(h.value());
      trace->cell.push_back(g.value());
      trace->candidate.push_back(g_tilde.value());
    }
    outputs.push_back(ctx.maybe_dropout(h));
  }
  return step_major_to_example_major(outputs, encoded.summary.rows());
}

Var GruDecoder::hidden(const EncodedExposure& encoded, const Var& inputs, Eigen::Index T,
                       const ForwardContext& ctx, DecoderTrace* trace) const {
  check_decoder_shapes(encoded, inputs, T);
  const auto& p = params_;
  Var h = encoded.summary;
  std::vector<Var> outputs;
  for (Eigen::Index t = 0; t < T; ++t) {
    const Var b = step_rows(inputs, T, t);
    const Var x = ag::concat_cols(h, b);
    const Var z = ag::sigmoid(ag::add_row(ag::matmul(x, p.w_z), p.p_z));
    const Var r = ag::sigmoid(ag::add_row(ag::matmul(x, p.w_r), p.p_r));
    const Var h_tilde =
        ag::tanh(ag::add_row(ag::matmul(ag::concat_cols(ag::mul(r, h), b), p.w_h), p.p_h));
    // h_t = (1 - z) * h_{t-1} + z * h~_t
    h = ag::add(ag::mul(ag::affine(z, -1.0, 1.0), h), ag::mul(z, h_tilde));
    if (trace) {
      trace->hidden.push_back(h.value());
      trace->candidate.push_back(h_tilde.value());
      trace->update_gate.push_back(z.value());
    }
    outputs.push_back(ctx.maybe_dropout(h));
  }
  return step_major_to_example_major(outputs, encoded.summary.rows());
}

TransformerDecoderParams TransformerDecoderParams::create(ParameterStore& store,
                                                          const std::string& prefix, int d,
                                                          int heads, int max_len) {
  TransformerDecoderParams p;
  p.position_embedding = store.add_uniform(prefix + ".position_embedding", max_len, d, d);
  p.self_attention = MultiHeadAttentionParams::create(store, prefix + ".self_attention", d, heads);
  p.self_norm = LayerNormParams::create(store, prefix + ".self_norm", d);
  p.cross_attention = MultiHeadAttentionParams::create(store, prefix + ".cross_attention", d, heads);
  p.cross_norm = LayerNormParams::create(store, prefix + ".cross_norm", d);
  p.ffn = FeedForwardParams::create(store, prefix + ".ffn", d, d);
  p.ffn_norm = LayerNormParams::create(store, prefix + ".ffn_norm", d);
  return p;
}

Var TransformerDecoder::hidden(const EncodedExposure& encoded, const Var& inputs, Eigen::Index T,
                               const ForwardContext& ctx, DecoderTrace* trace) const {
  check_decoder_shapes(encoded, inputs, T);
  const auto& p = params_;
  if (T > p.position_embedding.rows())
    throw DataError("transformer decoder: sequence longer than the position table");
  const Eigen::Index batch = inputs.rows() / T;
  std::vector<int> positions(static_cast<std::size_t>(batch * T));
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index t = 0; t < T; ++t) positions[static_cast<std::size_t>(b * T + t)] = static_cast<int>(t);
  const Var x = ag::add(inputs, ag::gather_rows(p.position_embedding, positions));

  Matrix* self_weights = trace ? &trace->self_attention : nullptr;
  Matrix* cross_weights = trace ? &trace->cross_attention : nullptr;
  const Var normed = p.self_norm(x);
  const Var h1 = ag::add(x, ctx.maybe_dropout(p.self_attention(normed, normed, T, T, true, self_weights)));
  const Var h2 = ag::add(h1, ctx.maybe_dropout(p.cross_attention(
                                 p.cross_norm(h1), encoded.memory, T, encoded.memory_len, false,
                                 cross_weights)));
  return ag::add(h2, ctx.maybe_dropout(p.ffn(p.ffn_norm(h2))));
}

std::vector<int> shifted_decoder_input(std::span<const int> behavior, int start_token) {
  std::vector<int> out{start_token};
  out.insert(out.end(), behavior.rbegin(), behavior.rend());
  return out;
}

std::vector<int> reversed_targets(std::span<const int> behavior, int end_token) {
  std::vector<int> out(behavior.rbegin(), behavior.rend());
  out.push_back(end_token);
  return out;
}

}  // namespace leakaudit
