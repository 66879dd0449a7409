#include "leakaudit/layers.hpp"

#include <cmath>

#include "leakaudit/error.hpp"

namespace leakaudit {

Var ParameterStore::add(const std::string& name, Matrix value) {
  auto [it, inserted] = params_.try_emplace(name, ag::parameter(std::move(value)));
  if (!inserted) throw ConfigError("duplicate parameter name '" + name + "'");
  return it->second;
}

Var ParameterStore::add_uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                                double fan) {
  const double bound = 1.0 / std::sqrt(fan);
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix value(rows, cols);
  for (Eigen::Index i = 0; i < value.size(); ++i) value.data()[i] = dist(rng_);
  return add(name, std::move(value));
}

Var ParameterStore::add_constant(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                                 double value) {
  return add(name, Matrix::Constant(rows, cols, value));
}

const Var& ParameterStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParameterStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += static_cast<std::size_t>(p.value().size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

Var ForwardContext::maybe_dropout(const Var& x) const {
  if (!training || dropout <= 0.0 || rng == nullptr) return x;
  return ag::dropout(x, dropout, *rng);
}

LayerNormParams LayerNormParams::create(ParameterStore& store, const std::string& prefix, int d) {
  return {store.add_constant(prefix + ".gain", 1, d, 1.0),
          store.add_constant(prefix + ".bias", 1, d, 0.0)};
}

FeedForwardParams FeedForwardParams::create(ParameterStore& store, const std::string& prefix,
                                            int d, int hidden) {
  FeedForwardParams p;
  p.w1 = store.add_uniform(prefix + ".w1", d, hidden, d);
  p.b1 = store.add_constant(prefix + ".b1", 1, hidden, 0.0);
  p.w2 = store.add_uniform(prefix + ".w2", hidden, d, hidden);
  p.b2 = store.add_constant(prefix + ".b2", 1, d, 0.0);
  return p;
}

Var FeedForwardParams::operator()(const Var& x) const {
  const Var hidden = ag::relu(ag::add_row(ag::matmul(x, w1), b1));
  return ag::add_row(ag::matmul(hidden, w2), b2);
}

MultiHeadAttentionParams MultiHeadAttentionParams::create(ParameterStore& store,
                                                          const std::string& prefix, int d,
                                                          int heads) {
  if (heads < 1 || d % heads != 0) throw ConfigError("attention heads must divide d");
  MultiHeadAttentionParams p;
  p.wq = store.add_uniform(prefix + ".wq", d, d, d);
  p.wk = store.add_uniform(prefix + ".wk", d, d, d);
  p.wv = store.add_uniform(prefix + ".wv", d, d, d);
  p.wo = store.add_uniform(prefix + ".wo", d, d, d);
  p.heads = heads;
  return p;
}

Var MultiHeadAttentionParams::operator()(const Var& queries, const Var& keys,
                                         Eigen::Index query_len, Eigen::Index key_len,
                                         bool causal, Matrix* weights) const {
  const Var q = ag::matmul(queries, wq);
  const Var k = ag::matmul(keys, wk);
  const Var v = ag::matmul(keys, wv);
  ag::AttentionShape shape;
  shape.heads = heads;
  shape.query_len = query_len;
  shape.key_len = key_len;
  shape.causal = causal;
  shape.scale = 1.0 / std::sqrt(static_cast<double>(queries.cols()));
  return ag::matmul(ag::attention(q, k, v, shape, weights), wo);
}

}  // namespace leakaudit
