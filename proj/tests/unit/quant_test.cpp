#include <cmath>

#include <gtest/gtest.h>

#include "sprx/ops.hpp"
#include "sprx/quant.hpp"

using namespace sprx;

TEST(QuantSpec, Bounds) {
  const auto q8 = QuantSpec::for_bits(8, 1);
  EXPECT_EQ(q8.lo, -128);
  EXPECT_EQ(q8.hi, 127);
  const auto q4 = QuantSpec::for_bits(4, 1);
  EXPECT_EQ(q4.lo, -8);
  EXPECT_EQ(q4.hi, 7);
  EXPECT_THROW(QuantSpec::for_bits(8, 0), std::invalid_argument);
  EXPECT_THROW(QuantSpec::for_bits(8, -1), std::invalid_argument);
  EXPECT_THROW(QuantSpec::for_bits(1, 1), std::invalid_argument);
  EXPECT_THROW(QuantSpec::for_bits(8, std::numeric_limits<real>::infinity()), std::invalid_argument);
}

TEST(FakeQuantize, RoundsToNearestStep) {
  const Tensor w = Tensor::from({4}, {real(0.26), real(0.24), real(-0.76), 0});
  const Tensor q = fake_quantize(w, QuantSpec::for_bits(8, real(0.5)));
  EXPECT_EQ(q[0], real(0.5));
  EXPECT_EQ(q[1], 0);
  EXPECT_EQ(q[2], real(-1));
  EXPECT_EQ(q[3], 0);
}

TEST(FakeQuantize, IsIdempotent) {
  Rng rng(1);
  std::normal_distribution<double> n;
  std::vector<real> v(500);
  for (auto& x : v) x = static_cast<real>(n(rng));
  const Tensor w({500}, v);
  const auto spec = QuantSpec::for_bits(6, calibrate_scale(w, 6));
  const Tensor q1 = fake_quantize(w, spec);
  const Tensor q2 = fake_quantize(q1, spec);
  for (std::size_t i = 0; i < 500; ++i) EXPECT_EQ(q1[i], q2[i]);
  EXPECT_TRUE(on_grid(q1, spec));
}

TEST(FakeQuantize, ClipsAndBlocksGradientOutside) {
  const Tensor w = Tensor::from({3}, {1000, real(0.3), -1000}, true);
  const auto spec = QuantSpec::for_bits(8, 1);
  const Tensor q = fake_quantize(w, spec);
  EXPECT_EQ(q[0], 127);
  EXPECT_EQ(q[1], 0);
  EXPECT_EQ(q[2], -128);
  backward(sum_all(mul(q, Tensor::from({3}, {2, 3, 4}))));
  EXPECT_EQ(w.grad()[0], 0);
  EXPECT_EQ(w.grad()[1], 3);
  EXPECT_EQ(w.grad()[2], 0);
}

TEST(FakeQuantize, GradientPassesAtClipEdges) {
  const Tensor w = Tensor::from({2}, {127, -128}, true);
  backward(sum_all(fake_quantize(w, QuantSpec::for_bits(8, 1))));
  EXPECT_EQ(w.grad()[0], 1);
  EXPECT_EQ(w.grad()[1], 1);
}

TEST(OnGrid, Detects) {
  const auto spec = QuantSpec::for_bits(4, real(0.25));
  EXPECT_TRUE(on_grid(Tensor::from({3}, {real(0.25), real(-2), real(1.75)}), spec));
  EXPECT_FALSE(on_grid(Tensor::from({1}, {real(0.3)}), spec));
  EXPECT_FALSE(on_grid(Tensor::from({1}, {real(2)}), spec));  // 8 > hi
}

TEST(Calibration, MaxOverLevels) {
  EXPECT_EQ(calibrate_scale(Tensor::from({3}, {real(0.5), real(-2.54), 1}), 8), real(2.54) / 127);
  EXPECT_EQ(calibrate_scale(Tensor::zeros({4}), 8), 1);
  const Tensor w = Tensor::from({2}, {real(-2.54), 1});
  const Tensor q = fake_quantize(w, QuantSpec::for_bits(8, calibrate_scale(w, 8)));
  EXPECT_NEAR(q[0], -2.54, 1e-6);
}

TEST(PostTraining, QuantizesEveryParameter) {
  ModelConfig c;
  c.filters = 4;
  Rng rng(3);
  const ParamSet p = init_params(c, rng);
  for (unsigned bits : {8u, 4u}) {
    const auto [q, scales] = post_training_quantize(p, bits);
    ASSERT_EQ(q.size(), p.size());
    for (const auto& [name, t] : q.entries()) {
      EXPECT_TRUE(on_grid(t, QuantSpec::for_bits(bits, scales.at(name)))) << name;
      EXPECT_FALSE(t.requires_grad());
      const auto& orig = p.at(name);
      for (std::size_t i = 0; i < t.numel(); ++i) EXPECT_LE(std::abs(t[i] - orig[i]), scales.at(name) / 2 * 1.0001);
    }
  }
}

TEST(PostTraining, MissingScaleRejected) {
  ParamSet p;
  p.add("w", Tensor::from({1}, {1}));
  EXPECT_THROW(fake_quantize_params(p, {}, 8), std::invalid_argument);
}
