#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "leakaudit/decoders.hpp"
#include "leakaudit/error.hpp"
#include "test_support.hpp"

using namespace leakaudit;
namespace lt = leakaudit::testing;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void set(const Var& v, const Matrix& value) {
  Var handle = v;
  handle.mutable_value() = value;
}

EncodedExposure summary_only(const Matrix& c) {
  EncodedExposure e;
  e.summary = ag::constant(c);
  e.memory = e.summary;
  e.memory_len = 1;
  return e;
}

TEST(SmoothLabels, WorkedExample) {
  const std::vector<int> behavior{2, 7};
  const Eigen::VectorXd y = smooth_labels(behavior, 0.1, 10);
  for (int j = 0; j < 10; ++j) EXPECT_NEAR(y(j), (j == 2 || j == 7) ? 0.45 : 0.0125, 1e-15);
  EXPECT_NEAR(y.sum(), 1.0, 1e-12);
}

TEST(SmoothLabels, RejectsInvalidInput) {
  const std::vector<int> behavior{0, 1, 2};
  EXPECT_THROW(smooth_labels(behavior, 0.1, 3), DataError);
  EXPECT_THROW(smooth_labels(behavior, 0.0, 10), ConfigError);
  EXPECT_THROW(smooth_labels(std::vector<int>{}, 0.1, 10), DataError);
  EXPECT_THROW(smooth_labels(std::vector<int>{11}, 0.1, 10), DataError);
}

TEST(SmoothLabels, RepeatedClickKeepsMassNormalised) {
  const std::vector<int> behavior{4, 4, 1};
  const Eigen::VectorXd y = smooth_labels(behavior, 0.2, 6);
  EXPECT_NEAR(y(4), 0.8 * 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(y(1), 0.8 / 3.0, 1e-15);
  EXPECT_NEAR(y.sum(), 1.0, 1e-12);
}

TEST(PointwiseLoss, UniformEntropy) {
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(4, 0.25);
  EXPECT_NEAR(pointwise_loss(u, u), std::log(4.0), 1e-12);
}

TEST(PointwiseLoss, BoundedBelowByEntropy) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.01, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd y(6), q(6);
    for (int j = 0; j < 6; ++j) {
      y(j) = unit(rng);
      q(j) = unit(rng);
    }
    y /= y.sum();
    q /= q.sum();
    double oracle = 0.0, entropy = 0.0;
    for (int j = 0; j < 6; ++j) {
      oracle -= y(j) * std::log(q(j));
      entropy -= y(j) * std::log(y(j));
    }
    EXPECT_NEAR(pointwise_loss(y, q), oracle, 1e-8);
    EXPECT_GE(pointwise_loss(y, q), entropy - 1e-12);
    EXPECT_NEAR(pointwise_loss(y, y), entropy, 1e-12);
  }
}

TEST(PointwiseLoss, ClampReportsZeroProbability) {
  Eigen::VectorXd y(2), q(2);
  y << 1.0, 0.0;
  q << 0.0, 1.0;
  bool clamped = false;
  EXPECT_NEAR(pointwise_loss(y, q, &clamped), -std::log(1e-12), 1e-9);
  EXPECT_TRUE(clamped);
}

TEST(SequenceLoss, PerfectAndUniform) {
  Matrix perfect = Matrix::Zero(3, 8);
  const std::vector<int> targets{1, 5, 7};
  for (int m = 0; m < 3; ++m) perfect(m, targets[static_cast<std::size_t>(m)]) = 1.0;
  EXPECT_EQ(sequence_loss(perfect, targets), 0.0);
  EXPECT_NEAR(sequence_loss(Matrix::Constant(3, 8, 1.0 / 8), targets), 3.0 * std::log(8.0), 1e-12);
  std::mt19937_64 rng(4);
  const Matrix Q = ag::softmax_rows(lt::random_matrix(3, 8, rng));
  double oracle = 0.0;
  for (int m = 0; m < 3; ++m)
    for (int j = 0; j < 8; ++j)
      if (j == targets[static_cast<std::size_t>(m)]) oracle -= std::log(Q(m, j));
  EXPECT_NEAR(sequence_loss(Q, targets), oracle, 1e-8);
}

TEST(PointwiseDecode, ZeroWeightsGiveUniform) {
  const Eigen::VectorXd q = pointwise_decode(Eigen::RowVectorXd::Ones(3), Matrix::Zero(3, 5),
                                             Eigen::RowVectorXd::Zero(5), Activation::Tanh);
  EXPECT_LT((q.array() - 0.2).abs().maxCoeff(), 1e-15);
}

TEST(PointwiseDecode, ShiftInvariantAndMatchesOracle) {
  std::mt19937_64 rng(6);
  const Eigen::RowVectorXd c = lt::random_matrix(1, 4, rng);
  const Matrix W = lt::random_matrix(4, 7, rng);
  const Eigen::RowVectorXd b = lt::random_matrix(1, 7, rng);
  const Eigen::VectorXd q = pointwise_decode(c, W, b, Activation::Identity);
  const Eigen::VectorXd shifted = pointwise_decode(c, W, (b.array() + 3.0).matrix(), Activation::Identity);
  EXPECT_LT((q - shifted).cwiseAbs().maxCoeff(), 1e-12);
  const Eigen::RowVectorXd z = (c * W + b).array().tanh().matrix();
  const double denom = z.array().exp().sum();
  const Eigen::VectorXd tq = pointwise_decode(c, W, b, Activation::Tanh);
  for (int j = 0; j < 7; ++j) EXPECT_NEAR(tq(j), std::exp(z(j)) / denom, 1e-6);
}

TEST(SequenceHelpers, ReversedTeacherForcing) {
  const std::vector<int> behavior{10, 11, 12};
  EXPECT_EQ(shifted_decoder_input(behavior, 99), (std::vector<int>{99, 12, 11, 10}));
  EXPECT_EQ(reversed_targets(behavior, 98), (std::vector<int>{12, 11, 10, 98}));
}

TEST(Lstm, MatchesScalarRecurrenceOracle) {
  const int d = 2;
  ParameterStore store;
  const LstmParams p = LstmParams::create(store, "lstm", d);
  std::mt19937_64 rng(8);
  for (const Var* v : {&p.w_i, &p.w_f, &p.w_g, &p.w_o}) set(*v, lt::random_matrix(2 * d, d, rng, 0.3));
  for (const Var* v : {&p.p_i, &p.p_f, &p.p_g, &p.p_o}) set(*v, lt::random_matrix(1, d, rng, 0.3));
  const Matrix c = lt::random_matrix(1, d, rng);
  const Matrix inputs = lt::random_matrix(3, d, rng);
  DecoderTrace trace;
  const Matrix out = LstmDecoder(p).hidden(summary_only(c), ag::constant(inputs), 3, ForwardContext{}, &trace).value();

  std::vector<double> h{c(0, 0), c(0, 1)}, g = h;
  auto gate = [&](const Var& w, const Var& bias, int j, const std::vector<double>& x) {
    double s = bias.value()(0, j);
    for (int r = 0; r < 2 * d; ++r) s += x[static_cast<std::size_t>(r)] * w.value()(r, j);
    return s;
  };
  for (int t = 0; t < 3; ++t) {
    const std::vector<double> x{h[0], h[1], inputs(t, 0), inputs(t, 1)};
    std::vector<double> nh(2), ng(2);
    for (int j = 0; j < d; ++j) {
      const double i = sigmoid(gate(p.w_i, p.p_i, j, x));
      const double f = sigmoid(gate(p.w_f, p.p_f, j, x));
      const double gt = std::tanh(gate(p.w_g, p.p_g, j, x));
      const double o = sigmoid(gate(p.w_o, p.p_o, j, x));
      ng[static_cast<std::size_t>(j)] = i * gt + f * g[static_cast<std::size_t>(j)];
      nh[static_cast<std::size_t>(j)] = o * std::tanh(ng[static_cast<std::size_t>(j)]);
    }
    h = nh;
    g = ng;
    for (int j = 0; j < d; ++j) {
      EXPECT_NEAR(out(t, j), h[static_cast<std::size_t>(j)], 1e-6);
      EXPECT_NEAR(trace.cell[static_cast<std::size_t>(t)](0, j), g[static_cast<std::size_t>(j)], 1e-6);
    }
  }
}

TEST(Lstm, ZeroWeightsFixedPoint) {
  const int d = 3;
  ParameterStore store;
  const LstmParams p = LstmParams::create(store, "lstm", d);
  for (const Var* v : {&p.w_i, &p.w_f, &p.w_g, &p.w_o}) set(*v, Matrix::Zero(2 * d, d));
  for (const Var* v : {&p.p_i, &p.p_f, &p.p_g, &p.p_o}) set(*v, Matrix::Zero(1, d));
  std::mt19937_64 rng(1);
  // Zero summary: g stays 0 (0.5 * tanh(0) + 0.5 * 0), so h = 0.5 * tanh(0) = 0.
  DecoderTrace trace;
  const Matrix out = LstmDecoder(p)
                         .hidden(summary_only(Matrix::Zero(1, d)), ag::constant(lt::random_matrix(4, d, rng)), 4,
                                 ForwardContext{}, &trace)
                         .value();
  EXPECT_EQ(out.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gru, MatchesScalarRecurrenceOracle) {
  const int d = 2;
  ParameterStore store;
  const GruParams p = GruParams::create(store, "gru", d);
  std::mt19937_64 rng(9);
  for (const Var* v : {&p.w_z, &p.w_r, &p.w_h}) set(*v, lt::random_matrix(2 * d, d, rng, 0.3));
  for (const Var* v : {&p.p_z, &p.p_r, &p.p_h}) set(*v, lt::random_matrix(1, d, rng, 0.3));
  const Matrix c = lt::random_matrix(1, d, rng);
  const Matrix inputs = lt::random_matrix(3, d, rng);
  const Matrix out = GruDecoder(p).hidden(summary_only(c), ag::constant(inputs), 3, ForwardContext{}).value();

  std::vector<double> h{c(0, 0), c(0, 1)};
  auto affine = [&](const Var& w, const Var& bias, int j, const std::vector<double>& x) {
    double s = bias.value()(0, j);
    for (int r = 0; r < 2 * d; ++r) s += x[static_cast<std::size_t>(r)] * w.value()(r, j);
    return s;
  };
  for (int t = 0; t < 3; ++t) {
    const std::vector<double> x{h[0], h[1], inputs(t, 0), inputs(t, 1)};
    std::vector<double> r(2), z(2), nh(2);
    for (int j = 0; j < d; ++j) {
      z[static_cast<std::size_t>(j)] = sigmoid(affine(p.w_z, p.p_z, j, x));
      r[static_cast<std::size_t>(j)] = sigmoid(affine(p.w_r, p.p_r, j, x));
    }
    const std::vector<double> xr{r[0] * h[0], r[1] * h[1], inputs(t, 0), inputs(t, 1)};
    for (int j = 0; j < d; ++j) {
      const double cand = std::tanh(affine(p.w_h, p.p_h, j, xr));
      const auto u = static_cast<std::size_t>(j);
      nh[u] = (1.0 - z[u]) * h[u] + z[u] * cand;
    }
    h = nh;
    for (int j = 0; j < d; ++j) EXPECT_NEAR(out(t, j), h[static_cast<std::size_t>(j)], 1e-6);
  }
}

TEST(Gru, UpdateGateLimits) {
  const int d = 3;
  ParameterStore store;
  const GruParams p = GruParams::create(store, "gru", d);
  std::mt19937_64 rng(10);
  const Matrix c = lt::random_matrix(1, d, rng);
  const Matrix inputs = lt::random_matrix(2, d, rng);
  set(p.w_z, Matrix::Zero(2 * d, d));

  set(p.p_z, Matrix::Constant(1, d, 60.0));  // z = 1
  DecoderTrace full;
  const Matrix updated = GruDecoder(p).hidden(summary_only(c), ag::constant(inputs), 2, ForwardContext{}, &full).value();
  for (int t = 0; t < 2; ++t)
    EXPECT_LT((updated.row(t) - full.candidate[static_cast<std::size_t>(t)]).cwiseAbs().maxCoeff(), 1e-15);

  set(p.p_z, Matrix::Constant(1, d, -60.0));  // z = 0
  const Matrix carried = GruDecoder(p).hidden(summary_only(c), ag::constant(inputs), 2, ForwardContext{}).value();
  for (int t = 0; t < 2; ++t) EXPECT_LT((carried.row(t) - c).cwiseAbs().maxCoeff(), 1e-15);
}

class TransformerTest : public ::testing::Test {
 protected:
  static constexpr int d = 8;
  static constexpr int T = 4;
  ParameterStore store{12};
  TransformerDecoder decoder{TransformerDecoderParams::create(store, "dec", d, 2, T)};
  std::mt19937_64 rng{14};
  EncodedExposure memory() {
    EncodedExposure e;
    e.memory = ag::constant(lt::random_matrix(2 * 6, d, rng));
    e.memory_len = 6;
    e.summary = ag::constant(lt::random_matrix(2, d, rng));
    return e;
  }
};

TEST_F(TransformerTest, FutureInputsDoNotAffectEarlierPositions) {
  const EncodedExposure enc = memory();
  const Matrix inputs = lt::random_matrix(2 * T, d, rng);
  const Matrix base = decoder.hidden(enc, ag::constant(inputs), T, ForwardContext{}).value();
  for (int changed = 1; changed < T; ++changed) {
    Matrix altered = inputs;
    altered.row(changed).setConstant(5.0);
    altered.row(T + changed).setConstant(-5.0);
    const Matrix out = decoder.hidden(enc, ag::constant(altered), T, ForwardContext{}).value();
    for (int b = 0; b < 2; ++b)
      for (int t = 0; t < changed; ++t)
        EXPECT_TRUE((out.row(b * T + t).array() == base.row(b * T + t).array()).all());
  }
}

TEST_F(TransformerTest, PositionsBreakPermutationSymmetry) {
  const EncodedExposure enc = memory();
  const Matrix inputs = lt::random_matrix(2 * T, d, rng);
  Matrix swapped = inputs;
  swapped.row(1).swap(swapped.row(2));
  const Matrix a = decoder.hidden(enc, ag::constant(inputs), T, ForwardContext{}).value();
  const Matrix b = decoder.hidden(enc, ag::constant(swapped), T, ForwardContext{}).value();
  EXPECT_GT((a.row(2) - b.row(1)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST_F(TransformerTest, CrossAttentionRowsSumToOne) {
  DecoderTrace trace;
  decoder.hidden(memory(), ag::constant(lt::random_matrix(2 * T, d, rng)), T, ForwardContext{}, &trace);
  ASSERT_EQ(trace.cross_attention.rows(), 2 * 2 * T);
  ASSERT_EQ(trace.cross_attention.cols(), 6);
  for (Eigen::Index r = 0; r < trace.cross_attention.rows(); ++r)
    EXPECT_NEAR(trace.cross_attention.row(r).sum(), 1.0, 1e-6);
}

TEST_F(TransformerTest, SequenceLongerThanPositionTableIsRejected) {
  EXPECT_THROW(decoder.hidden(memory(), ag::constant(lt::random_matrix(2 * 5, d, rng)), 5, ForwardContext{}),
               DataError);
}

TEST(RecurrentDecoders, FutureInputsDoNotAffectEarlierSteps) {
  std::mt19937_64 rng(15);
  ParameterStore store(3);
  const LstmDecoder lstm(LstmParams::create(store, "l", 6));
  const GruDecoder gru(GruParams::create(store, "g", 6));
  const EncodedExposure enc = summary_only(lt::random_matrix(1, 6, rng));
  const Matrix inputs = lt::random_matrix(4, 6, rng);
  for (const SequenceDecoder* dec : std::initializer_list<const SequenceDecoder*>{&lstm, &gru}) {
    const Matrix base = dec->hidden(enc, ag::constant(inputs), 4, ForwardContext{}).value();
    Matrix altered = inputs;
    altered.row(3).setConstant(9.0);
    const Matrix out = dec->hidden(enc, ag::constant(altered), 4, ForwardContext{}).value();
    EXPECT_TRUE((out.topRows(3).array() == base.topRows(3).array()).all());
    EXPECT_FALSE((out.row(3).array() == base.row(3).array()).all());
  }
}

TEST(Decoders, KindAndActivationNames) {
  EXPECT_EQ(parse_decoder_kind("pointwise"), DecoderKind::Pointwise);
  EXPECT_EQ(parse_decoder_kind("lstm"), DecoderKind::Lstm);
  EXPECT_EQ(parse_decoder_kind("gru"), DecoderKind::Gru);
  EXPECT_EQ(parse_decoder_kind("transformer"), DecoderKind::Transformer);
  EXPECT_THROW(parse_decoder_kind("rnn"), ConfigError);
  EXPECT_EQ(parse_activation("tanh"), Activation::Tanh);
  EXPECT_THROW(parse_activation("gelu"), ConfigError);
}

}  // namespace
