#include "leakaudit/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace leakaudit::ag {

namespace {

thread_local bool g_grad_enabled = true;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

// Builds the output node. Parents and the backward closure are only kept when
// the graph is being recorded and at least one input needs a gradient.
Var make_result(Matrix value, std::initializer_list<const Var*> inputs,
                std::function<void(Node&)> fn) {
  Var out(std::move(value));
  if (!g_grad_enabled) return out;
  bool needs = false;
  for (const Var* in : inputs) needs = needs || in->requires_grad();
  if (!needs) return out;
  Node& node = *out.node();
  node.requires_grad = true;
  for (const Var* in : inputs) node.parents.push_back(in->node());
  node.backward_fn = std::move(fn);
  return out;
}

Var make_result_n(Matrix value, std::span<const Var> inputs, std::function<void(Node&)> fn) {
  Var out(std::move(value));
  if (!g_grad_enabled) return out;
  bool needs = std::any_of(inputs.begin(), inputs.end(),
                           [](const Var& v) { return v.requires_grad(); });
  if (!needs) return out;
  Node& node = *out.node();
  node.requires_grad = true;
  for (const Var& in : inputs) node.parents.push_back(in.node());
  node.backward_fn = std::move(fn);
  return out;
}

}  // namespace

Matrix& Node::grad_ref() {
  if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }
  return grad;
}

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

const Matrix& Var::grad() const { return node_->grad_ref(); }

void Var::zero_grad() {
  if (node_) node_->grad.setZero(node_->value.rows(), node_->value.cols());
}

void Var::backward() const {
  require(node_ && node_->value.size() == 1, "backward() needs a scalar output");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_ref().setOnes();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

Var constant(Matrix value) { return Var(std::move(value), false); }
Var parameter(Matrix value) { return Var(std::move(value), true); }

// Accumulates into parent i when it participates in the gradient.
#define LEAKAUDIT_PARENT(i) (self.parents[i]->requires_grad ? self.parents[i].get() : nullptr)

Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Matrix out = a.value() * b.value();
  return make_result(std::move(out), {&a, &b}, [](Node& self) {
    Node* pa = LEAKAUDIT_PARENT(0);
    Node* pb = LEAKAUDIT_PARENT(1);
    if (pa) pa->grad_ref().noalias() += self.grad * self.parents[1]->value.transpose();
    if (pb) pb->grad_ref().noalias() += self.parents[0]->value.transpose() * self.grad;
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require(a.cols() == b.cols(), "matmul_nt: column counts differ");
  Matrix out = a.value() * b.value().transpose();
  return make_result(std::move(out), {&a, &b}, [](Node& self) {
    Node* pa = LEAKAUDIT_PARENT(0);
    Node* pb = LEAKAUDIT_PARENT(1);
    if (pa) pa->grad_ref().noalias() += self.grad * self.parents[1]->value;
    if (pb) pb->grad_ref().noalias() += self.grad.transpose() * self.parents[0]->value;
  });
}

Var add(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  return make_result(a.value() + b.value(), {&a, &b}, [](Node& self) {
    if (Node* pa = LEAKAUDIT_PARENT(0)) pa->grad_ref() += self.grad;
    if (Node* pb = LEAKAUDIT_PARENT(1)) pb->grad_ref() += self.grad;
  });
}

Var sub(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  return make_result(a.value() - b.value(), {&a, &b}, [](Node& self) {
    if (Node* pa = LEAKAUDIT_PARENT(0)) pa->grad_ref() += self.grad;
    if (Node* pb = LEAKAUDIT_PARENT(1)) pb->grad_ref() -= self.grad;
  });
}

Var mul(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shape mismatch");
  Matrix out = a.value().cwiseProduct(b.value());
  return make_result(std::move(out), {&a, &b}, [](Node& self) {
    if (Node* pa = LEAKAUDIT_PARENT(0))
      pa->grad_ref() += self.grad.cwiseProduct(self.parents[1]->value);
    if (Node* pb = LEAKAUDIT_PARENT(1))
      pb->grad_ref() += self.grad.cwiseProduct(self.parents[0]->value);
  });
}

Var add_row(const Var& a, const Var& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row: expects a 1 x cols row");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make_result(std::move(out), {&a, &row}, [](Node& self) {
    if (Node* pa = LEAKAUDIT_PARENT(0)) pa->grad_ref() += self.grad;
    if (Node* pr = LEAKAUDIT_PARENT(1)) pr->grad_ref() += self.grad.colwise().sum();
  });
}

Var affine(const Var& a, double alpha, double beta) {
  Matrix out = (alpha * a.value().array() + beta).matrix();
  return make_result(std::move(out), {&a}, [alpha](Node& self) {
    if (Node* pa = LEAKAUDIT_PARENT(0)) pa->grad_ref() += alpha * self.grad;
  });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_result(std::move(out), {&a}, [](Node& self) {
    if (Node* pa = LEAKAUDIT_PARENT(0)) pa->grad_ref().array() += self.grad(0, 0);
  });
}

Var tanh(const Var& a) {
  Matrix out = a.value().array().tanh().matrix();
  return make_result(std::move(out), {&a}, [](Node& self) {
    if (Node* pa = LEAKAUDIT_PARENT(0))
      pa->grad_ref().array() += self.grad.array() * (1.0 - self.value.array().square());
  });
}

Var sigmoid(const Var& a) {
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return make_result(std::move(out), {&a}, [](Node& self) {
    if (Node* pa = LEAKAUDIT_PARENT(0))
      pa->grad_ref().array() +=
          self.grad.array() * self.value.array() * (1.0 - self.value.array());
  });
}

Var relu(const Var& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return make_result(std::move(out), {&a}, [](Node& self) {
    if (Node* pa = LEAKAUDIT_PARENT(0))
      pa->grad_ref().array() +=
          (self.parents[0]->value.array() > 0.0).select(self.grad.array(), 0.0);
  });
}

Var dropout(const Var& a, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return a;
  require(rate < 1.0, "dropout: rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  Matrix mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : 0.0;
  Matrix out = a.value().cwiseProduct(mask);
  return make_result(std::move(out), {&a}, [mask = std::move(mask)](Node& self) {
    if (Node* pa = LEAKAUDIT_PARENT(0)) pa->grad_ref() += self.grad.cwiseProduct(mask);
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  require(gain.rows() == 1 && gain.cols() == d && bias.rows() == 1 && bias.cols() == d,
          "layer_norm: gain/bias must be 1 x cols");
  Matrix normed(n, d);
  Vector inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto row = x.value().row(r);
    const double mean = row.mean();
    const double var = (row.array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    normed.row(r) = (row.array() - mean) * inv_std(r);
  }
  Matrix out = (normed.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  return make_result(std::move(out), {&x, &gain, &bias},
                     [normed = std::move(normed), inv_std = std::move(inv_std)](Node& self) {
    const Eigen::Index d = normed.cols();
    if (Node* pg = LEAKAUDIT_PARENT(1))
      pg->grad_ref() += self.grad.cwiseProduct(normed).colwise().sum();
    if (Node* pb = LEAKAUDIT_PARENT(2)) pb->grad_ref() += self.grad.colwise().sum();
    if (Node* px = LEAKAUDIT_PARENT(0)) {
      const auto& gain_row = self.parents[1]->value.row(0);
      Matrix& gx = px->grad_ref();
      for (Eigen::Index r = 0; r < normed.rows(); ++r) {
        Eigen::RowVectorXd dn = self.grad.row(r).cwiseProduct(gain_row);
        const double mean_dn = dn.mean();
        const double mean_dn_n = dn.dot(normed.row(r)) / static_cast<double>(d);
        gx.row(r).array() +=
            inv_std(r) * (dn.array() - mean_dn - normed.row(r).array() * mean_dn_n);
      }
    }
  });
}

Var gather_rows(const Var& table, std::span<const int> indices) {
  const Eigen::Index rows = table.rows();
  Matrix out(static_cast<Eigen::Index>(indices.size()), table.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] >= 0 && indices[i] < rows, "gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(indices[i]);
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return make_result(std::move(out), {&table}, [idx = std::move(idx)](Node& self) {
    if (Node* pt = LEAKAUDIT_PARENT(0)) {
      Matrix& g = pt->grad_ref();
      for (std::size_t i = 0; i < idx.size(); ++i)
        g.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    }
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows: out of range");
  Matrix out = a.value().middleRows(start, count);
  return make_result(std::move(out), {&a}, [start, count](Node& self) {
    if (Node* pa = LEAKAUDIT_PARENT(0)) pa->grad_ref().middleRows(start, count) += self.grad;
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols: out of range");
  Matrix out = a.value().middleCols(start, count);
  return make_result(std::move(out), {&a}, [start, count](Node& self) {
    if (Node* pa = LEAKAUDIT_PARENT(0)) pa->grad_ref().middleCols(start, count) += self.grad;
  });
}

Var concat_cols(const Var& a, const Var& b) {
  require(a.rows() == b.rows(), "concat_cols: row counts differ");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Eigen::Index split = a.cols();
  return make_result(std::move(out), {&a, &b}, [split](Node& self) {
    if (Node* pa = LEAKAUDIT_PARENT(0)) pa->grad_ref() += self.grad.leftCols(split);
    if (Node* pb = LEAKAUDIT_PARENT(1))
      pb->grad_ref() += self.grad.rightCols(self.grad.cols() - split);
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  Eigen::Index total = 0;
  for (const Var& p : parts) {
    require(p.cols() == parts.front().cols(), "concat_rows: column counts differ");
    total += p.rows();
  }
  Matrix out(total, parts.front().cols());
  std::vector<Eigen::Index> offsets;
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    offsets.push_back(offset);
    offset += p.rows();
  }
  return make_result_n(std::move(out), parts, [offsets = std::move(offsets)](Node& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      Node* p = self.parents[i].get();
      if (!p->requires_grad) continue;
      p->grad_ref() += self.grad.middleRows(offsets[i], p->value.rows());
    }
  });
}

namespace {

// Row indices [start, start+count) sorted lexicographically by the content
// of columns [col, col+width) of `a`, then of `b` when given. Reducing in
// this order makes a sum independent of the rows' original arrangement.
std::vector<Eigen::Index> canonical_row_order(const Matrix& a, Eigen::Index start, Eigen::Index count,
                                              const Matrix* b, Eigen::Index col = 0,
                                              Eigen::Index width = -1) {
  if (width < 0) width = a.cols() - col;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), start);
  auto less = [&](Eigen::Index x, Eigen::Index y) {
    for (const Matrix* m : {&a, b}) {
      if (m == nullptr) continue;
      for (Eigen::Index c = col; c < col + width; ++c) {
        // NaN sorts last so the order stays strict-weak.
        const double u = (*m)(x, c), w = (*m)(y, c);
        const bool nu = std::isnan(u), nw = std::isnan(w);
        if (nu != nw) return nw;
        if (u < w) return true;
        if (w < u) return false;
      }
    }
    return false;
  };
  std::stable_sort(order.begin(), order.end(), less);
  return order;
}

}  // namespace

Var segment_mean(const Var& x, Eigen::Index group) {
  require(group > 0 && x.rows() % group == 0, "segment_mean: rows not divisible by group");
  const Eigen::Index segments = x.rows() / group;
  Matrix out = Matrix::Zero(segments, x.cols());
  for (Eigen::Index s = 0; s < segments; ++s) {
    // Rows are summed in content order so the result does not depend on
    // how the segment was permuted.
    for (Eigen::Index r : canonical_row_order(x.value(), s * group, group, nullptr))
      out.row(s) += x.value().row(r);
    out.row(s) /= static_cast<double>(group);
  }
  return make_result(std::move(out), {&x}, [group](Node& self) {
    if (Node* px = LEAKAUDIT_PARENT(0)) {
      Matrix& g = px->grad_ref();
      const double inv = 1.0 / static_cast<double>(group);
      for (Eigen::Index s = 0; s < self.grad.rows(); ++s)
        g.middleRows(s * group, group).rowwise() += self.grad.row(s) * inv;
    }
  });
}

Var segment_max(const Var& x, Eigen::Index group) {
  require(group > 0 && x.rows() % group == 0, "segment_max: rows not divisible by group");
  const Eigen::Index segments = x.rows() / group;
  const Eigen::Index d = x.cols();
  Matrix out(segments, d);
  // Argmax row per (segment, column); first maximum wins on ties.
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(segments * d));
  for (Eigen::Index s = 0; s < segments; ++s) {
    for (Eigen::Index c = 0; c < d; ++c) {
      Eigen::Index best = s * group;
      for (Eigen::Index r = s * group + 1; r < (s + 1) * group; ++r)
        if (x.value()(r, c) > x.value()(best, c)) best = r;
      out(s, c) = x.value()(best, c);
      arg[static_cast<std::size_t>(s * d + c)] = best;
    }
  }
  return make_result(std::move(out), {&x}, [arg = std::move(arg)](Node& self) {
    if (Node* px = LEAKAUDIT_PARENT(0)) {
      Matrix& g = px->grad_ref();
      const Eigen::Index d = self.grad.cols();
      for (Eigen::Index s = 0; s < self.grad.rows(); ++s)
        for (Eigen::Index c = 0; c < d; ++c)
          g(arg[static_cast<std::size_t>(s * d + c)], c) += self.grad(s, c);
    }
  });
}

Var attention(const Var& q, const Var& k, const Var& v, const AttentionShape& shape,
              Matrix* weights) {
  const Eigen::Index d = q.cols();
  const Eigen::Index tq = shape.query_len;
  const Eigen::Index tk = shape.key_len;
  require(shape.heads > 0 && d % shape.heads == 0, "attention: width not divisible by heads");
  require(k.cols() == d && v.cols() == d, "attention: q/k/v widths differ");
  require(tq > 0 && tk > 0 && q.rows() % tq == 0, "attention: bad query length");
  const Eigen::Index batch = q.rows() / tq;
  require(k.rows() == batch * tk && v.rows() == batch * tk, "attention: key rows mismatch");
  require(!shape.causal || tq <= tk, "attention: causal mask needs query_len <= key_len");

  const Eigen::Index hd = d / shape.heads;
  const int heads = shape.heads;
  // Probabilities stacked as (batch, head, query) rows.
  Matrix probs(batch * heads * tq, tk);
  Matrix out(q.rows(), d);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      const auto qh = q.value().block(b * tq, h * hd, tq, hd);
      const auto kh = k.value().block(b * tk, h * hd, tk, hd);
      const auto vh = v.value().block(b * tk, h * hd, tk, hd);
      auto p = probs.middleRows((b * heads + h) * tq, tq);
      auto o = out.block(b * tq, h * hd, tq, hd);
      // Without a mask the keys are visited in content order, which makes
      // every output row independent of how the keys were permuted.
      std::vector<Eigen::Index> order;
      if (shape.causal) {
        order.resize(static_cast<std::size_t>(tk));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
      } else {
        order = canonical_row_order(k.value(), b * tk, tk, &v.value(), h * hd, hd);
        for (Eigen::Index& j : order) j -= b * tk;
      }
      // Scalar loops keep the summation order identical for every row.
      for (Eigen::Index i = 0; i < tq; ++i) {
        const std::size_t visible = static_cast<std::size_t>(shape.causal ? i + 1 : tk);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t n = 0; n < visible; ++n) {
          const Eigen::Index j = order[n];
          double dot = 0.0;
          for (Eigen::Index c = 0; c < hd; ++c) dot += qh(i, c) * kh(j, c);
          p(i, j) = dot * shape.scale;
          mx = std::max(mx, p(i, j));
        }
        double total = 0.0;
        for (std::size_t n = 0; n < visible; ++n) {
          const Eigen::Index j = order[n];
          p(i, j) = std::exp(p(i, j) - mx);
          total += p(i, j);
        }
        for (std::size_t n = 0; n < visible; ++n) p(i, order[n]) /= total;
        for (Eigen::Index j = static_cast<Eigen::Index>(visible); j < tk; ++j) p(i, j) = 0.0;
        o.row(i).setZero();
        for (std::size_t n = 0; n < visible; ++n) o.row(i) += p(i, order[n]) * vh.row(order[n]);
      }
    }
  }
  if (weights) *weights = probs;
  return make_result(std::move(out), {&q, &k, &v},
                     [probs = std::move(probs), batch, heads, tq, tk, hd,
                      scale = shape.scale](Node& self) {
    Node* pq = LEAKAUDIT_PARENT(0);
    Node* pk = LEAKAUDIT_PARENT(1);
    Node* pv = LEAKAUDIT_PARENT(2);
    const Matrix& qv = self.parents[0]->value;
    const Matrix& kv = self.parents[1]->value;
    const Matrix& vv = self.parents[2]->value;
    Matrix dp(tq, tk);
    Matrix ds(tq, tk);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (int h = 0; h < heads; ++h) {
        const auto p = probs.middleRows((b * heads + h) * tq, tq);
        const auto dout = self.grad.block(b * tq, h * hd, tq, hd);
        if (pv) pv->grad_ref().block(b * tk, h * hd, tk, hd).noalias() += p.transpose() * dout;
        if (!pq && !pk) continue;
        dp.noalias() = dout * vv.block(b * tk, h * hd, tk, hd).transpose();
        // Softmax Jacobian; masked entries have p = 0 and drop out.
        const Eigen::VectorXd inner = dp.cwiseProduct(p).rowwise().sum();
        ds = p.cwiseProduct(dp.colwise() - inner) * scale;
        if (pq) pq->grad_ref().block(b * tq, h * hd, tq, hd).noalias() +=
            ds * kv.block(b * tk, h * hd, tk, hd);
        if (pk) pk->grad_ref().block(b * tk, h * hd, tk, hd).noalias() +=
            ds.transpose() * qv.block(b * tq, h * hd, tq, hd);
      }
    }
  });
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - mx).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

namespace {

// Row-wise log-sum-exp.
Eigen::VectorXd log_sum_exp(const Matrix& logits) {
  Eigen::VectorXd lse(logits.rows());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    lse(r) = mx + std::log((logits.row(r).array() - mx).exp().sum());
  }
  return lse;
}

}  // namespace

Var softmax_cross_entropy(const Var& logits, const Matrix& targets) {
  require(targets.rows() == logits.rows() && targets.cols() == logits.cols(),
          "softmax_cross_entropy: target shape mismatch");
  const Eigen::VectorXd lse = log_sum_exp(logits.value());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r)
    loss -= targets.row(r).dot((logits.value().row(r).array() - lse(r)).matrix());
  Matrix out(1, 1);
  out(0, 0) = loss;
  return make_result(std::move(out), {&logits}, [targets](Node& self) {
    if (Node* pl = LEAKAUDIT_PARENT(0)) {
      const Matrix p = softmax_rows(pl->value);
      const Eigen::VectorXd mass = targets.rowwise().sum();
      pl->grad_ref() += self.grad(0, 0) * (p.array().colwise() * mass.array() - targets.array()).matrix();
    }
  });
}

Var softmax_cross_entropy(const Var& logits, std::span<const int> targets) {
  require(static_cast<Eigen::Index>(targets.size()) == logits.rows(),
          "softmax_cross_entropy: one target per row required");
  const Eigen::VectorXd lse = log_sum_exp(logits.value());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    require(t >= 0 && t < logits.cols(), "softmax_cross_entropy: target out of range");
    loss -= logits.value()(r, t) - lse(r);
  }
  Matrix out(1, 1);
  out(0, 0) = loss;
  std::vector<int> idx(targets.begin(), targets.end());
  return make_result(std::move(out), {&logits}, [idx = std::move(idx)](Node& self) {
    if (Node* pl = LEAKAUDIT_PARENT(0)) {
      Matrix g = softmax_rows(pl->value);
      for (std::size_t r = 0; r < idx.size(); ++r) g(static_cast<Eigen::Index>(r), idx[r]) -= 1.0;
      pl->grad_ref() += self.grad(0, 0) * g;
    }
  });
}

#undef LEAKAUDIT_PARENT

}  // namespace leakaudit::ag
