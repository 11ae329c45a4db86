#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "sprx/ops.hpp"

using namespace sprx;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, bool grad = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  std::vector<real> v(numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v), grad);
}

}  // namespace

TEST(Tensor, DataLengthMatchesShape) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(t.data().size(), 24u);
  EXPECT_THROW(Tensor({2, 2}, std::vector<real>{1, 2, 3}), ShapeError);
}

TEST(Tensor, GradHasDataShape) {
  Tensor w = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
  backward(sum_all(mul(w, w)));
  ASSERT_TRUE(w.has_grad());
  EXPECT_EQ(w.grad().size(), w.numel());
  EXPECT_FLOAT_EQ(w.grad()[3], 8.f);
}

TEST(Conv2d, ScalarMultiplyAdd) {
  Tensor x = Tensor::from({1, 1, 1}, {2});
  Tensor k = Tensor::from({1, 1, 1, 1}, {3});
  Tensor b = Tensor::from({1}, {1});
  EXPECT_FLOAT_EQ(conv2d(x, k, b).item(), 7.f);
}

TEST(Conv2d, ZeroKernelAnnihilates) {
  Tensor x = random_tensor({2, 3, 5, 6}, 1);
  Tensor y = conv2d(x, Tensor::zeros({4, 3, 3, 3}), Tensor::zeros({4}));
  EXPECT_EQ(y.shape(), (Shape{2, 4, 5, 6}));
  for (real v : y.data()) EXPECT_EQ(v, 0.f);
}

TEST(Conv2d, OnesOverOnesCountsNeighbours) {
  Tensor y = conv2d(Tensor::ones({1, 3, 3}), Tensor::ones({1, 1, 3, 3}), Tensor::zeros({1}));
  // Hand count of in-bounds taps for each output position.
  const float expected[9] = {4, 6, 4, 6, 9, 6, 4, 6, 4};
  for (int i = 0; i < 9; ++i) EXPECT_FLOAT_EQ(y[i], expected[i]) << i;
}

TEST(Conv2d, IdentityKernelIsIdentity) {
  Tensor x = random_tensor({2, 3, 4, 5}, 2);
  Tensor k = Tensor::zeros({3, 3, 3, 3});
  for (std::size_t c = 0; c < 3; ++c) k.mutable_data()[((c * 3 + c) * 3 + 1) * 3 + 1] = 1;
  Tensor y = conv2d(x, k, Tensor::zeros({3}));
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Conv2d, ShapeMismatchNamesBothShapes) {
  try {
    conv2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({3, 5, 3, 3}), Tensor::zeros({3}));
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[1,2,4,4]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3,5,3,3]"), std::string::npos) << msg;
  }
  EXPECT_THROW(conv2d(Tensor::zeros({1, 4, 4}), Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1})), ShapeError);
}

TEST(LayerNorm, TwoChannelOracle) {
  const double eps = 1e-5;
  Tensor x = Tensor::from({2, 1, 1}, {1, 3});
  Tensor y = layer_norm(x, Tensor::ones({2}), Tensor::zeros({2}), real(eps));
  // Independent scalar evaluation.
  const double mu = (1.0 + 3.0) / 2, var = ((1 - mu) * (1 - mu) + (3 - mu) * (3 - mu)) / 2;
  EXPECT_NEAR(y[0], (1 - mu) / std::sqrt(var + eps), 1e-6);
  EXPECT_NEAR(y[1], (3 - mu) / std::sqrt(var + eps), 1e-6);
}

TEST(LayerNorm, ConstantInputGivesZeros) {
  Tensor y = layer_norm(Tensor({4, 3, 3}, 2.5f), Tensor::ones({4}), Tensor::zeros({4}));
  for (real v : y.data()) EXPECT_EQ(v, 0.f);
}

TEST(LayerNorm, ZeroGainCollapsesToShift) {
  Tensor shift = Tensor::from({3}, {0.5, -1, 2});
  Tensor y = layer_norm(random_tensor({2, 3, 2, 2}, 3), Tensor::zeros({3}), shift);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t p = 0; p < 4; ++p) EXPECT_EQ(y[(b * 3 + c) * 4 + p], shift[c]);
}

TEST(LayerNorm, NormalizesEachPosition) {
  Tensor y = layer_norm(random_tensor({8, 3, 3}, 4), Tensor::ones({8}), Tensor::zeros({8}));
  for (std::size_t p = 0; p < 9; ++p) {
    double s = 0, s2 = 0;
    for (std::size_t c = 0; c < 8; ++c) s += y[c * 9 + p], s2 += y[c * 9 + p] * y[c * 9 + p];
    EXPECT_NEAR(s / 8, 0, 1e-6);
    EXPECT_NEAR(s2 / 8, 1, 1e-3);
  }
}

TEST(LayerNorm, RejectsNonFinite) {
  Tensor x = Tensor::from({2, 1, 1}, {1, std::nanf("")});
  EXPECT_THROW(layer_norm(x, Tensor::ones({2}), Tensor::zeros({2})), NumericalError);
  EXPECT_THROW(layer_norm(Tensor::ones({2, 1, 1}), Tensor::ones({2}), Tensor::zeros({2}), 0), std::invalid_argument);
}

TEST(Elementwise, Iand) {
  EXPECT_EQ(logical_iand(Tensor::scalar(1), Tensor::scalar(1)).item(), 0.f);
  EXPECT_EQ(logical_iand(Tensor::scalar(0), Tensor::scalar(1)).item(), 1.f);
}

TEST(Elementwise, AndWithZero) {
  for (float a : {0.f, 1.f}) EXPECT_EQ(logical_and(Tensor::scalar(a), Tensor::scalar(0)).item(), 0.f);
}

TEST(Elementwise, AddOfSpikes) {
  Tensor y = add(Tensor::from({2}, {1, 0}), Tensor::from({2}, {1, 1}));
  EXPECT_EQ(y[0], 2.f);
  EXPECT_EQ(y[1], 1.f);
}

TEST(Elementwise, LogicalClosedOnBinary) {
  for (float a : {0.f, 1.f})
    for (float b : {0.f, 1.f}) {
      const float x = logical_and(Tensor::scalar(a), Tensor::scalar(b)).item();
      const float y = logical_iand(Tensor::scalar(a), Tensor::scalar(b)).item();
      EXPECT_TRUE(x == 0.f || x == 1.f);
      EXPECT_TRUE(y == 0.f || y == 1.f);
    }
}

TEST(Elementwise, ShapeMismatch) {
  EXPECT_THROW(add(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
  EXPECT_THROW(mul(Tensor::zeros({2, 1}), Tensor::zeros({1, 2})), ShapeError);
  EXPECT_THROW(logical_and(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
}

TEST(Sigmoid, AtZero) { EXPECT_FLOAT_EQ(sigmoid(Tensor::scalar(0)).item(), 0.5f); }

TEST(Bce, MaximumEntropyPredictor) {
  Tensor labels = Tensor::from({4}, {0, 1, 1, 0});
  EXPECT_NEAR(bce_loss(Tensor({4}, 0.5f), labels).item(), std::log(2.0), 1e-6);
}

TEST(Bce, ScalarValue) {
  EXPECT_NEAR(bce_loss(Tensor::from({1}, {0.9}), Tensor::from({1}, {1})).item(), -std::log(0.9), 1e-6);
}

TEST(Bce, RejectsNonBinaryLabels) {
  EXPECT_THROW(bce_loss(Tensor({2}, 0.5f), Tensor::from({2}, {0, 0.5})), std::invalid_argument);
}

TEST(Bce, NonNegativeAndBounded) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  for (int trial = 0; trial < 200; ++trial) {
    const float p = u(rng);
    const float l = static_cast<float>(rng() & 1);
    const float loss = bce_loss(Tensor::from({1}, {p}), Tensor::from({1}, {l})).item();
    EXPECT_GE(loss, 0.f);
    EXPECT_LE(loss, 16.2f);
  }
  // Exact predictions sit at the clamp, not at zero.
  EXPECT_LT(bce_loss(Tensor::from({2}, {1, 0}), Tensor::from({2}, {1, 0})).item(), 1e-6f);
  EXPECT_NEAR(bce_loss(Tensor::from({1}, {0}), Tensor::from({1}, {1})).item(), -std::log(1e-7), 1e-2);
}

TEST(Backward, Product) {
  Tensor w = Tensor::scalar(3, true);
  backward(mul(w, Tensor::scalar(2)));
  EXPECT_FLOAT_EQ(w.grad()[0], 2.f);
}

TEST(Backward, SigmoidAtZero) {
  Tensor w = Tensor::scalar(0, true);
  backward(sigmoid(w));
  EXPECT_FLOAT_EQ(w.grad()[0], 0.25f);
}

TEST(Backward, RejectsNonScalar) {
  Tensor w = Tensor::zeros({2}, true);
  EXPECT_THROW(backward(scale(w, 2)), ShapeError);
}

TEST(Backward, Accumulates) {
  Tensor w = Tensor::scalar(3, true);
  Tensor loss = mul(w, Tensor::scalar(2));
  backward(loss);
  backward(mul(w, Tensor::scalar(2)));
  EXPECT_FLOAT_EQ(w.grad()[0], 4.f);
  w.zero_grad();
  EXPECT_FLOAT_EQ(w.grad()[0], 0.f);
}

TEST(Backward, SharedSubexpressionVisitedOnce) {
  Tensor w = Tensor::scalar(1.5, true);
  Tensor s = sigmoid(w);
  Tensor loss = add(s, s);
  GradTape tape = GradTape::record(loss);
  EXPECT_EQ(tape.size(), 2u);
  tape.replay(loss);
  const float sg = 1.f / (1.f + std::exp(-1.5f));
  EXPECT_NEAR(w.grad()[0], 2 * sg * (1 - sg), 1e-6);
}

TEST(Backward, NoGradGuardSkipsRecording) {
  Tensor w = Tensor::scalar(1, true);
  Tensor y;
  {
    NoGradGuard guard;
    y = mul(w, w);
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(grad_enabled());
}

TEST(Backward, ReplayIsBitIdentical) {
  auto grads = [] {
    Tensor x = random_tensor({2, 3, 4, 4}, 11);
    Tensor k = random_tensor({5, 3, 3, 3}, 12, true);
    Tensor b = random_tensor({5}, 13, true);
    Tensor y = sigmoid(layer_norm(conv2d(x, k, b), Tensor::ones({5}), Tensor::zeros({5})));
    backward(bce_loss(y, Tensor({2, 5, 4, 4}, 1.f)));
    std::vector<real> g(k.grad().begin(), k.grad().end());
    g.insert(g.end(), b.grad().begin(), b.grad().end());
    return g;
  };
  EXPECT_EQ(grads(), grads());
}

TEST(Reductions, MeanSelectStack) {
  Tensor x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor m0 = mean(x, 0);
  EXPECT_EQ(m0.shape(), (Shape{3}));
  EXPECT_FLOAT_EQ(m0[2], 4.5f);
  Tensor m1 = mean(x, 1);
  EXPECT_FLOAT_EQ(m1[1], 5.f);
  const std::size_t idx[] = {2, 0};
  Tensor s = select(x, 1, idx);
  EXPECT_EQ(s.shape(), (Shape{2, 2}));
  EXPECT_FLOAT_EQ(s[0], 3.f);
  EXPECT_FLOAT_EQ(s[3], 4.f);
  Tensor st = stack({x, x});
  EXPECT_EQ(st.shape(), (Shape{2, 2, 3}));
  EXPECT_THROW(mean(x, 2), ShapeError);
}
