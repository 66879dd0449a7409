#include "leakaudit/model.hpp"

#include <algorithm>
#include <cmath>

#include "leakaudit/error.hpp"

namespace leakaudit {

double ModelSpec::effective_epsilon() const {
  return epsilon > 0.0 ? epsilon : 1.0 / static_cast<double>(num_items);
}

void ModelSpec::validate() const {
  if (num_items < 2) throw ConfigError("model: need at least two items");
  if (M < 1 || N < 1) throw ConfigError("model: M and N must be >= 1");
  if (M >= num_items) throw ConfigError("model: M must be smaller than |I|");
  if (d < 1) throw ConfigError("model: d must be >= 1");
  if (heads < 1 || d % heads != 0) throw ConfigError("model: heads must divide d");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must lie in [0, 1)");
  const double eps = effective_epsilon();
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("model: epsilon must lie in (0, 1)");
}

Batch Batch::from(std::span<const AttackExample* const> examples, int M, int N) {
  Batch batch;
  batch.size = static_cast<Eigen::Index>(examples.size());
  batch.slates.reserve(examples.size() * static_cast<std::size_t>(N));
  batch.behaviors.reserve(examples.size() * static_cast<std::size_t>(M));
  for (const AttackExample* ex : examples) {
    if (ex->exposure.items.size() != static_cast<std::size_t>(N))
      throw DataError("batch: slate length differs from N");
    if (ex->behavior.items.size() != static_cast<std::size_t>(M))
      throw DataError("batch: behavior length differs from M");
    batch.slates.insert(batch.slates.end(), ex->exposure.items.begin(), ex->exposure.items.end());
    batch.behaviors.insert(batch.behaviors.end(), ex->behavior.items.begin(),
                           ex->behavior.items.end());
  }
  return batch;
}

Batch Batch::from(std::span<const AttackExample> examples, int M, int N) {
  std::vector<const AttackExample*> ptrs;
  ptrs.reserve(examples.size());
  for (const AttackExample& ex : examples) ptrs.push_back(&ex);
  return from(std::span<const AttackExample* const>(ptrs), M, N);
}

AttackModel::AttackModel(ModelSpec spec, std::uint64_t seed) : spec_(spec), store_(seed) {
  spec_.validate();
  const int d = spec_.d;
  const int items = spec_.num_items;
  item_table_ = store_.add_uniform("item_embedding", items + Vocabulary::kNumSpecialTokens, d, d);
  encoder_ = std::make_unique<Encoder>(spec_.encoder, d, spec_.heads, store_);
  switch (spec_.decoder) {
    case DecoderKind::Pointwise:
      pointwise_.bias = store_.add_constant("decoder.pointwise.bias", 1, items, 0.0);
      pointwise_.activation = spec_.activation;
      return;
    case DecoderKind::Lstm:
      sequence_decoder_ = std::make_unique<LstmDecoder>(LstmParams::create(store_, "decoder.lstm", d));
      break;
    case DecoderKind::Gru:
      sequence_decoder_ = std::make_unique<GruDecoder>(GruParams::create(store_, "decoder.gru", d));
      break;
    case DecoderKind::Transformer:
      sequence_decoder_ = std::make_unique<TransformerDecoder>(
          TransformerDecoderParams::create(store_, "decoder.transformer", d, spec_.heads, spec_.M + 1));
      break;
  }
  output_head_ = OutputHead::create(store_, "decoder.output", d, items + 1);
}

EncodedExposure AttackModel::encode(std::span<const int> slates, const ForwardContext& ctx,
                                    bool keep_attention) const {
  if (slates.empty() || slates.size() % static_cast<std::size_t>(spec_.N) != 0)
    throw DataError("encode: slate indices must be a positive multiple of N");
  for (int item : slates)
    if (item < 0 || item >= spec_.num_items)
      throw DataError("encode: slate contains a non-item index " + std::to_string(item));
  const Var embedded = ag::gather_rows(item_table_, slates);
  const Var cls = ag::slice_rows(item_table_, cls_token(), 1);
  return encoder_->encode(embedded, spec_.N, cls, ctx, keep_attention);
}

Var AttackModel::output_logits(const EncodedExposure& encoded, std::span<const int> decoder_inputs,
                               Eigen::Index T, const ForwardContext& ctx) const {
  const Var inputs = ag::gather_rows(item_table_, decoder_inputs);
  const Var hidden = sequence_decoder_->hidden(encoded, inputs, T, ctx);
  return output_head_.logits(hidden, ag::slice_rows(item_table_, 0, spec_.num_items + 1));
}

Var AttackModel::loss(const Batch& batch, const ForwardContext& ctx) const {
  if (batch.size == 0) throw DataError("loss: empty batch");
  const EncodedExposure encoded = encode(batch.slates, ctx);
  const int M = spec_.M;
  const int items = spec_.num_items;
  const double eps = spec_.effective_epsilon();
  const double inv_batch = 1.0 / static_cast<double>(batch.size);

  if (spec_.decoder == DecoderKind::Pointwise) {
    const Var logits = pointwise_.logits(encoded.summary, ag::slice_rows(item_table_, 0, items));
    Matrix targets(batch.size, items);
    for (Eigen::Index b = 0; b < batch.size; ++b) {
      const std::span<const int> behavior(batch.behaviors.data() + b * M, static_cast<std::size_t>(M));
      targets.row(b) = smooth_labels(behavior, eps, items).transpose();
    }
    return ag::affine(ag::softmax_cross_entropy(logits, targets), inv_batch, 0.0);
  }

  const Eigen::Index T = M + 1;
  std::vector<int> inputs;
  std::vector<int> targets;
  inputs.reserve(static_cast<std::size_t>(batch.size * T));
  targets.reserve(static_cast<std::size_t>(batch.size * T));
  for (Eigen::Index b = 0; b < batch.size; ++b) {
    const std::span<const int> behavior(batch.behaviors.data() + b * M, static_cast<std::size_t>(M));
    const auto in = shifted_decoder_input(behavior, start_token());
    const auto out = reversed_targets(behavior, end_token());
    inputs.insert(inputs.end(), in.begin(), in.end());
    targets.insert(targets.end(), out.begin(), out.end());
  }
  const Var logits = output_logits(encoded, inputs, T, ctx);
  if (!spec_.sequence_label_smoothing)
    return ag::affine(ag::softmax_cross_entropy(logits, targets), inv_batch, 0.0);

  const Eigen::Index classes = items + 1;
  Matrix smoothed = Matrix::Constant(logits.rows(), classes, eps / static_cast<double>(classes - 1));
  for (std::size_t r = 0; r < targets.size(); ++r)
    smoothed(static_cast<Eigen::Index>(r), targets[r]) = 1.0 - eps;
  return ag::affine(ag::softmax_cross_entropy(logits, smoothed), inv_batch, 0.0);
}

Matrix AttackModel::teacher_forced_probabilities(const Batch& batch) const {
  ag::NoGradGuard guard;
  const ForwardContext ctx;
  const EncodedExposure encoded = encode(batch.slates, ctx);
  if (spec_.decoder == DecoderKind::Pointwise) {
    return ag::softmax_rows(
        pointwise_.logits(encoded.summary, ag::slice_rows(item_table_, 0, spec_.num_items)).value());
  }
  const int M = spec_.M;
  std::vector<int> inputs;
  for (Eigen::Index b = 0; b < batch.size; ++b) {
    const std::span<const int> behavior(batch.behaviors.data() + b * M, static_cast<std::size_t>(M));
    const auto in = shifted_decoder_input(behavior, start_token());
    inputs.insert(inputs.end(), in.begin(), in.end());
  }
  return ag::softmax_rows(output_logits(encoded, inputs, M + 1, ctx).value());
}

std::vector<RankedInference> AttackModel::infer(std::span<const int> slates) const {
  ag::NoGradGuard guard;
  const ForwardContext ctx;
  const EncodedExposure encoded = encode(slates, ctx);
  const Eigen::Index batch = encoded.summary.rows();
  const int items = spec_.num_items;
  std::vector<RankedInference> out(static_cast<std::size_t>(batch));

  if (spec_.decoder == DecoderKind::Pointwise) {
    const Matrix probs = ag::softmax_rows(
        pointwise_.logits(encoded.summary, ag::slice_rows(item_table_, 0, items)).value());
    for (Eigen::Index b = 0; b < batch; ++b) {
      out[static_cast<std::size_t>(b)].mode = RankedInference::Mode::Pointwise;
      out[static_cast<std::size_t>(b)].scores.push_back(probs.row(b).transpose());
    }
    return out;
  }

  std::vector<std::vector<int>> prefixes(static_cast<std::size_t>(batch), {start_token()});
  for (auto& r : out) r.mode = RankedInference::Mode::Sequencewise;
  for (int step = 0; step < spec_.M; ++step) {
    const Eigen::Index T = step + 1;
    std::vector<int> flat;
    flat.reserve(static_cast<std::size_t>(batch * T));
    for (const auto& p : prefixes) flat.insert(flat.end(), p.begin(), p.end());
    const Matrix logits = output_logits(encoded, flat, T, ctx).value();
    for (Eigen::Index b = 0; b < batch; ++b) {
      // END is dropped from the candidate set before normalising.
      const Matrix item_logits = logits.block(b * T + step, 0, 1, items);
      Eigen::VectorXd probs = ag::softmax_rows(item_logits).row(0).transpose();
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < probs.size(); ++j)
        if (probs(j) > probs(best)) best = j;
      prefixes[static_cast<std::size_t>(b)].push_back(static_cast<int>(best));
      out[static_cast<std::size_t>(b)].scores.push_back(std::move(probs));
    }
  }
  return out;
}

Matrix AttackModel::item_embeddings() const {
  return item_table_.value().topRows(spec_.num_items);
}

}  // namespace leakaudit
