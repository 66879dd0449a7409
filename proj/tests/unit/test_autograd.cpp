#include <gtest/gtest.h>

#include <array>
#include <random>

#include "leakaudit/autograd.hpp"
#include "test_support.hpp"

namespace ag = leakaudit::ag;
using leakaudit::testing::check_gradients;
using leakaudit::testing::random_matrix;
using ag::Matrix;
using ag::Var;

namespace {

constexpr double kTol = 1e-6;

// Weighted sum so every output element gets a distinct upstream gradient.
Var project(const Var& x, const Matrix& weights) {
  return ag::sum(ag::mul(x, ag::constant(weights)));
}

void expect_grads_ok(const std::map<std::string, Var>& params, const std::function<Var()>& loss) {
  for (const auto& r : check_gradients(params, loss)) EXPECT_LT(r.rel_error, kTol) << r.name;
}

class AutogradOps : public ::testing::Test {
 protected:
  std::mt19937_64 rng{42};
  Var param(Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    return ag::parameter(random_matrix(r, c, rng, scale));
  }
};

TEST_F(AutogradOps, MatmulVariants) {
  Var a = param(3, 4), b = param(4, 5), c = param(5, 4);
  const Matrix w = random_matrix(3, 5, rng);
  expect_grads_ok({{"a", a}, {"b", b}}, [&] { return project(ag::matmul(a, b), w); });
  expect_grads_ok({{"a", a}, {"c", c}}, [&] { return project(ag::matmul_nt(a, c), w); });
}

TEST_F(AutogradOps, ElementwiseArithmetic) {
  Var a = param(3, 4), b = param(3, 4), row = param(1, 4);
  const Matrix w = random_matrix(3, 4, rng);
  expect_grads_ok({{"a", a}, {"b", b}}, [&] { return project(ag::add(a, b), w); });
  expect_grads_ok({{"a", a}, {"b", b}}, [&] { return project(ag::sub(a, b), w); });
  expect_grads_ok({{"a", a}, {"b", b}}, [&] { return project(ag::mul(a, b), w); });
  expect_grads_ok({{"a", a}, {"row", row}}, [&] { return project(ag::add_row(a, row), w); });
  expect_grads_ok({{"a", a}}, [&] { return project(ag::affine(a, -2.5, 0.3), w); });
}

TEST_F(AutogradOps, Nonlinearities) {
  Var a = param(4, 5);
  const Matrix w = random_matrix(4, 5, rng);
  expect_grads_ok({{"a", a}}, [&] { return project(ag::tanh(a), w); });
  expect_grads_ok({{"a", a}}, [&] { return project(ag::sigmoid(a), w); });
  expect_grads_ok({{"a", a}}, [&] { return project(ag::relu(a), w); });
}

TEST_F(AutogradOps, DropoutWithFixedMask) {
  Var a = param(6, 5);
  const Matrix w = random_matrix(6, 5, rng);
  expect_grads_ok({{"a", a}}, [&] {
    std::mt19937_64 mask_rng(7);  // same mask on every evaluation
    return project(ag::dropout(a, 0.3, mask_rng), w);
  });
}

TEST_F(AutogradOps, DropoutScalesKeptUnits) {
  const Matrix ones = Matrix::Ones(200, 50);
  std::mt19937_64 mask_rng(3);
  const Matrix out = ag::dropout(ag::constant(ones), 0.25, mask_rng).value();
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double v = out.data()[i];
    EXPECT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-12);
  }
  EXPECT_NEAR(out.mean(), 1.0, 0.03);
}

TEST_F(AutogradOps, LayerNorm) {
  Var x = param(4, 6), gain = param(1, 6), bias = param(1, 6);
  const Matrix w = random_matrix(4, 6, rng);
  expect_grads_ok({{"x", x}, {"gain", gain}, {"bias", bias}},
                  [&] { return project(ag::layer_norm(x, gain, bias), w); });
}

TEST_F(AutogradOps, LayerNormRowsAreStandardised) {
  const Matrix x = random_matrix(5, 8, rng, 3.0);
  const Matrix y = ag::layer_norm(ag::constant(x), ag::constant(Matrix::Ones(1, 8)),
                                  ag::constant(Matrix::Zero(1, 8)), 0.0)
                       .value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    EXPECT_NEAR(y.row(r).mean(), 0.0, 1e-12);
    EXPECT_NEAR((y.row(r).array().square()).mean(), 1.0, 1e-9);
  }
}

TEST_F(AutogradOps, GatherSliceConcat) {
  Var table = param(6, 3), a = param(4, 3), b = param(4, 2), c = param(2, 3);
  const std::vector<int> idx{5, 0, 0, 3, 5};
  const Matrix w1 = random_matrix(5, 3, rng);
  expect_grads_ok({{"table", table}}, [&] { return project(ag::gather_rows(table, idx), w1); });
  const Matrix w2 = random_matrix(2, 3, rng);
  expect_grads_ok({{"a", a}}, [&] { return project(ag::slice_rows(a, 1, 2), w2); });
  const Matrix w3 = random_matrix(4, 2, rng);
  expect_grads_ok({{"a", a}}, [&] { return project(ag::slice_cols(a, 1, 2), w3); });
  const Matrix w4 = random_matrix(4, 5, rng);
  expect_grads_ok({{"a", a}, {"b", b}}, [&] { return project(ag::concat_cols(a, b), w4); });
  const Matrix w5 = random_matrix(6, 3, rng);
  expect_grads_ok({{"a", a}, {"c", c}}, [&] {
    const std::array<Var, 2> parts{a, c};
    return project(ag::concat_rows(parts), w5);
  });
}

TEST_F(AutogradOps, SegmentPooling) {
  Var x = param(6, 4);
  const Matrix w = random_matrix(2, 4, rng);
  expect_grads_ok({{"x", x}}, [&] { return project(ag::segment_mean(x, 3), w); });
  expect_grads_ok({{"x", x}}, [&] { return project(ag::segment_max(x, 3), w); });
}

TEST_F(AutogradOps, SegmentMaxTieGoesToFirstRow) {
  Var x = ag::parameter(Matrix::Ones(2, 1));
  ag::sum(ag::segment_max(x, 2)).backward();
  EXPECT_EQ(x.grad()(0, 0), 1.0);
  EXPECT_EQ(x.grad()(1, 0), 0.0);
}

TEST_F(AutogradOps, AttentionAllInputs) {
  for (const bool causal : {false, true}) {
    Var q = param(2 * 3, 4), k = param(2 * 3, 4), v = param(2 * 3, 4);
    ag::AttentionShape shape{2, 3, 3, causal, 0.5};
    const Matrix w = random_matrix(6, 4, rng);
    expect_grads_ok({{"q", q}, {"k", k}, {"v", v}},
                    [&] { return project(ag::attention(q, k, v, shape), w); });
  }
}

TEST_F(AutogradOps, CrossAttentionWithDifferentLengths) {
  Var q = param(2 * 2, 4), k = param(2 * 5, 4), v = param(2 * 5, 4);
  ag::AttentionShape shape{1, 2, 5, false, 0.5};
  const Matrix w = random_matrix(4, 4, rng);
  expect_grads_ok({{"q", q}, {"k", k}, {"v", v}},
                  [&] { return project(ag::attention(q, k, v, shape), w); });
}

TEST_F(AutogradOps, SoftmaxCrossEntropy) {
  Var logits = param(3, 5);
  Matrix targets = random_matrix(3, 5, rng).cwiseAbs();
  expect_grads_ok({{"logits", logits}}, [&] { return ag::softmax_cross_entropy(logits, targets); });
  const std::vector<int> classes{4, 0, 2};
  expect_grads_ok({{"logits", logits}}, [&] { return ag::softmax_cross_entropy(logits, classes); });
}

TEST_F(AutogradOps, CrossEntropyIndexFormMatchesDense) {
  const Matrix logits = random_matrix(3, 5, rng);
  const std::vector<int> classes{1, 4, 1};
  Matrix one_hot = Matrix::Zero(3, 5);
  for (int r = 0; r < 3; ++r) one_hot(r, classes[static_cast<std::size_t>(r)]) = 1.0;
  const double dense = ag::softmax_cross_entropy(ag::constant(logits), one_hot).value()(0, 0);
  const double sparse = ag::softmax_cross_entropy(ag::constant(logits), classes).value()(0, 0);
  EXPECT_NEAR(dense, sparse, 1e-12);
  double oracle = 0.0;
  for (int r = 0; r < 3; ++r)
    oracle -= std::log(std::exp(logits(r, classes[static_cast<std::size_t>(r)])) / logits.row(r).array().exp().sum());
  EXPECT_NEAR(dense, oracle, 1e-10);
}

TEST(SoftmaxRows, RowsSumToOneEvenForLargeLogits) {
  std::mt19937_64 rng(5);
  Matrix logits = random_matrix(20, 30, rng, 50.0);
  logits(0, 0) = 800.0;  // would overflow a naive exp
  const Matrix p = ag::softmax_rows(logits);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-12);
    EXPECT_TRUE((p.row(r).array() >= 0.0).all());
  }
}

TEST(Attention, WeightsAreRowStochastic) {
  std::mt19937_64 rng(9);
  const Var q = ag::constant(random_matrix(3 * 4, 6, rng));
  const Var k = ag::constant(random_matrix(3 * 5, 6, rng));
  Matrix weights;
  ag::attention(q, k, k, ag::AttentionShape{2, 4, 5, false, 0.4}, &weights);
  ASSERT_EQ(weights.rows(), 3 * 2 * 4);
  ASSERT_EQ(weights.cols(), 5);
  for (Eigen::Index r = 0; r < weights.rows(); ++r) EXPECT_NEAR(weights.row(r).sum(), 1.0, 1e-12);
}

TEST(Attention, CausalOutputIgnoresFutureKeys) {
  std::mt19937_64 rng(11);
  const Matrix q = random_matrix(5, 4, rng), k = random_matrix(5, 4, rng), v = random_matrix(5, 4, rng);
  const ag::AttentionShape shape{2, 5, 5, true, 0.5};
  const Matrix base = ag::attention(ag::constant(q), ag::constant(k), ag::constant(v), shape).value();
  for (Eigen::Index changed = 1; changed < 5; ++changed) {
    Matrix k2 = k, v2 = v;
    k2.row(changed).setConstant(123.0);
    v2.row(changed).setConstant(-77.0);
    const Matrix out = ag::attention(ag::constant(q), ag::constant(k2), ag::constant(v2), shape).value();
    for (Eigen::Index t = 0; t < changed; ++t)
      EXPECT_TRUE((out.row(t).array() == base.row(t).array()).all()) << "row " << t;
  }
}

TEST(Graph, NoGradGuardRecordsNothing) {
  Var a = ag::parameter(Matrix::Ones(2, 2));
  {
    ag::NoGradGuard guard;
    EXPECT_FALSE(ag::grad_enabled());
    const Var out = ag::mul(a, a);
    EXPECT_FALSE(out.requires_grad());
    EXPECT_TRUE(out.node()->parents.empty());
  }
  EXPECT_TRUE(ag::grad_enabled());
}

TEST(Graph, SharedSubexpressionAccumulates) {
  Var a = ag::parameter(Matrix::Constant(1, 1, 3.0));
  const Var b = ag::mul(a, a);            // a^2
  const Var out = ag::sum(ag::add(b, b));  // 2 a^2
  out.backward();
  EXPECT_DOUBLE_EQ(a.grad()(0, 0), 12.0);
}

TEST(Graph, BackwardRequiresScalar) {
  Var a = ag::parameter(Matrix::Ones(2, 2));
  EXPECT_ANY_THROW(ag::mul(a, a).backward());
}

}  // namespace
