#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>

#include "leakaudit/autograd.hpp"

namespace leakaudit {

using ag::Matrix;
using ag::Var;

// Named trainable parameters. Iteration order is by name, which keeps the
// checkpoint layout and optimizer traversal stable across runs.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 1) : rng_(seed) {}

  // Uniform in [-1/sqrt(fan), 1/sqrt(fan)].
  Var add_uniform(const std::string& name, Eigen::Index rows, Eigen::Index cols, double fan);
  Var add_constant(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value);

  const Var& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  const std::map<std::string, Var>& all() const { return params_; }
  std::size_t num_scalars() const;

  void zero_grad();

 private:
  Var add(const std::string& name, Matrix value);

  std::map<std::string, Var> params_;
  std::mt19937_64 rng_;
};

// Forward-pass switches shared by every module.
struct ForwardContext {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  Var maybe_dropout(const Var& x) const;
};

struct LayerNormParams {
  Var gain;
  Var bias;

  static LayerNormParams create(ParameterStore& store, const std::string& prefix, int d);
  Var operator()(const Var& x) const { return ag::layer_norm(x, gain, bias); }
};

// Position-wise two-layer network: relu(x W1 + b1) W2 + b2.
struct FeedForwardParams {
  Var w1, b1, w2, b2;

  static FeedForwardParams create(ParameterStore& store, const std::string& prefix, int d,
                                  int hidden);
  Var operator()(const Var& x) const;
};

// Multi-head attention with per-head projections packed column-wise into
// d x d matrices (head i owns columns [i*d/h, (i+1)*d/h)).
struct MultiHeadAttentionParams {
  Var wq, wk, wv, wo;
  int heads = 1;

  static MultiHeadAttentionParams create(ParameterStore& store, const std::string& prefix, int d,
                                         int heads);
  // queries: (B*query_len) x d; keys: (B*key_len) x d. Scores are scaled by
  // 1/sqrt(d) with d the model width.
  Var operator()(const Var& queries, const Var& keys, Eigen::Index query_len,
                 Eigen::Index key_len, bool causal, Matrix* weights = nullptr) const;
};

}  // namespace leakaudit
