#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. Every operation records a closure that propagates the output
// gradient to its inputs; Var::backward() replays them in reverse
// topological order.

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

namespace leakaudit::ag {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct Node {
  Matrix value;
  Matrix grad;  // lazily allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  // Zero-initialises the gradient on first use.
  Matrix& grad_ref();
};

class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  // Gradient after backward(); a zero matrix if nothing flowed here.
  const Matrix& grad() const;
  void zero_grad();
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }

  // Seeds d(this)/d(this) = 1; this must be a 1x1 scalar.
  void backward() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph recording for its lifetime (inference, finite differences).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

Var constant(Matrix value);
Var parameter(Matrix value);

// --- linear algebra -------------------------------------------------------
Var matmul(const Var& a, const Var& b);     // a * b
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var add_row(const Var& a, const Var& row);  // broadcast a 1 x cols row
Var affine(const Var& a, double alpha, double beta);  // alpha * a + beta
Var sum(const Var& a);  // 1x1

// --- pointwise nonlinearities ---------------------------------------------
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);

// Inverted dropout; identity when rate == 0.
Var dropout(const Var& a, double rate, std::mt19937_64& rng);

// Row-wise layer normalisation with learned gain and bias (1 x cols each).
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

// --- shape manipulation ---------------------------------------------------
Var gather_rows(const Var& table, std::span<const int> indices);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var concat_cols(const Var& a, const Var& b);
Var concat_rows(std::span<const Var> parts);

// Reduces consecutive groups of `group` rows to one row each.
Var segment_mean(const Var& x, Eigen::Index group);
Var segment_max(const Var& x, Eigen::Index group);

// --- attention ------------------------------------------------------------
struct AttentionShape {
  int heads = 1;
  Eigen::Index query_len = 1;  // rows per example in the query matrix
  Eigen::Index key_len = 1;    // rows per example in the key/value matrices
  bool causal = false;         // query t may only attend keys <= t
  double scale = 1.0;          // logits are (q . k) * scale
};

// Per-example, per-head softmax(Q K^T * scale) V. Q is (B*query_len) x d,
// K and V are (B*key_len) x d; heads split the columns evenly. When
// `weights` is non-null it receives the (B*heads*query_len) x key_len
// attention probabilities.
Var attention(const Var& q, const Var& k, const Var& v, const AttentionShape& shape,
              Matrix* weights = nullptr);

// --- losses ---------------------------------------------------------------
// Sum over rows of -sum_j y_j log softmax(logits)_j. `targets` has the same
// shape as `logits` and need not be normalised.
Var softmax_cross_entropy(const Var& logits, const Matrix& targets);

// Same loss with one-hot targets given by class index per row.
Var softmax_cross_entropy(const Var& logits, std::span<const int> targets);

// Numerically stable row-wise softmax of a plain matrix.
Matrix softmax_rows(const Matrix& logits);

}  // namespace leakaudit::ag
