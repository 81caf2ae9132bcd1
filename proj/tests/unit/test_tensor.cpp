#include <gtest/gtest.h>

#include <cmath>

#include "op_cases.hpp"
#include "superedge/errors.hpp"
#include "superedge/tensor.hpp"

using namespace superedge;
using namespace superedge::testing;

TEST(Tensor, ShapeHelpers) {
  EXPECT_EQ(shape_numel({2, 3, 4}), 24);
  EXPECT_EQ(shape_numel({}), 1);
  EXPECT_EQ(shape_to_string({2, 3}), "[2, 3]");
}

TEST(Tensor, HandlesAlias) {
  Tensor a = Tensor::zeros({3});
  Tensor b = a;
  b.data()[1] = 5.0F;
  EXPECT_EQ(a.data()[1], 5.0F);
  Tensor c = a.detach();
  c.data()[1] = 1.0F;
  EXPECT_EQ(a.data()[1], 5.0F);
}

TEST(Tensor, AddShapeMismatchThrows) {
  EXPECT_THROW(add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), ShapeError);
}

TEST(Tensor, ConvRejectsChannelMismatch) {
  EXPECT_THROW(conv2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({3, 1, 3, 3}), Tensor::zeros({3}), 1, 1), ShapeError);
}

TEST(Tensor, ConvMatchesDirectSum) {
  Rng rng = make_rng(3, {0});
  const Tensor x = random_tensor({2, 3, 6, 5}, rng), w = random_tensor({4, 3, 3, 3}, rng), b = random_tensor({4}, rng);
  const Tensor y = conv2d(x, w, b, 2, 1);
  ASSERT_EQ(y.shape(), (Shape{2, 4, 3, 3}));
  for (int n = 0; n < 2; ++n) {
    for (int o = 0; o < 4; ++o) {
      for (int oy = 0; oy < 3; ++oy) {
        for (int ox = 0; ox < 3; ++ox) {
          double acc = b.data()[o];
          for (int c = 0; c < 3; ++c) {
            for (int ky = 0; ky < 3; ++ky) {
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = oy * 2 - 1 + ky, ix = ox * 2 - 1 + kx;
                if (iy < 0 || iy >= 6 || ix < 0 || ix >= 5) continue;
                acc += static_cast<double>(x.data()[((n * 3 + c) * 6 + iy) * 5 + ix]) *
                       w.data()[((o * 3 + c) * 3 + ky) * 3 + kx];
              }
            }
          }
          EXPECT_NEAR(y.data()[((n * 4 + o) * 3 + oy) * 3 + ox], acc, 1e-5);
        }
      }
    }
  }
}

TEST(Tensor, SoftmaxChannelSumsToOne) {
  Rng rng = make_rng(4, {0});
  const Tensor p = softmax_channel(random_tensor({2, 7, 3, 2}, rng, -5.0F, 5.0F));
  for (int n = 0; n < 2; ++n) {
    for (int i = 0; i < 6; ++i) {
      double s = 0.0;
      for (int c = 0; c < 7; ++c) s += p.data()[(n * 7 + c) * 6 + i];
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(Tensor, AttentionWithEqualKeysAveragesValues) {
  // Identical keys give uniform attention: every output is the mean value.
  const Tensor q = Tensor::from_data({1, 1, 3}, {0.3F, -1.0F, 2.0F});
  const Tensor k = Tensor::full({1, 1, 3}, 0.7F);
  const Tensor v = Tensor::from_data({1, 2, 3}, {1, 2, 6, -3, 0, 3});
  const Tensor y = scaled_dot_attention(q, k, v);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(y.data()[i], 3.0F, 1e-6);
    EXPECT_NEAR(y.data()[3 + i], 0.0F, 1e-6);
  }
}

TEST(Tensor, BatchNormTrainingNormalizesAndTracks) {
  Rng rng = make_rng(5, {0});
  const Tensor x = random_tensor({4, 2, 3, 3}, rng, 2.0F, 4.0F);
  Tensor rm = Tensor::zeros({2}), rv = Tensor::full({2}, 1.0F);
  const Tensor y = batch_norm(x, Tensor::full({2}, 1.0F), Tensor::zeros({2}), rm, rv, true);
  for (int c = 0; c < 2; ++c) {
    double m = 0.0, v = 0.0, xm = 0.0;
    for (int n = 0; n < 4; ++n) {
      for (int i = 0; i < 9; ++i) {
        m += y.data()[(n * 2 + c) * 9 + i];
        xm += x.data()[(n * 2 + c) * 9 + i];
      }
    }
    m /= 36.0;
    xm /= 36.0;
    for (int n = 0; n < 4; ++n) {
      for (int i = 0; i < 9; ++i) v += std::pow(y.data()[(n * 2 + c) * 9 + i] - m, 2);
    }
    EXPECT_NEAR(m, 0.0, 1e-5);
    EXPECT_NEAR(v / 36.0, 1.0, 1e-3);
    EXPECT_NEAR(rm.data()[c], 0.1 * xm, 1e-5);
  }
}

TEST(Tensor, CrossEntropyRejectsBadLabels) {
  const Tensor logits = Tensor::zeros({1, 3, 1, 1});
  const std::vector<std::int32_t> bad{3};
  const std::vector<float> w{1.0F};
  EXPECT_THROW(cross_entropy_cell(logits, bad, w), std::out_of_range);
  const std::vector<std::int32_t> ok{1};
  EXPECT_NEAR(cross_entropy_cell(logits, ok, w).item(), std::log(3.0), 1e-6);
}

TEST(Tensor, NoGradGuardSkipsRecording) {
  Tensor a = Tensor::full({2}, 1.0F, true);
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_recording_enabled());
    EXPECT_FALSE(add(a, a).requires_grad());
  }
  EXPECT_TRUE(add(a, a).requires_grad());
}

TEST(Tensor, LeafGradientsAccumulate) {
  Tensor a = Tensor::full({2}, 3.0F, true);
  backward(sum(scale(a, 2.0F)));
  backward(sum(scale(a, 2.0F)));
  EXPECT_FLOAT_EQ(a.grad()[0], 4.0F);
  a.zero_grad();
  EXPECT_FLOAT_EQ(a.grad()[0], 0.0F);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // With bias correction the first update is lr * sign(g) (up to eps).
  Tensor p = Tensor::from_data({3}, {1.0F, -2.0F, 0.5F}, true);
  backward(sum(mul(p, Tensor::from_data({3}, {2.0F, -0.5F, 0.0F}))));
  std::vector<Tensor> params{p};
  AdamState st = AdamState::for_params(params, 0.01F);
  adam_step(params, st);
  EXPECT_NEAR(p.data()[0], 0.99F, 1e-6);
  EXPECT_NEAR(p.data()[1], -1.99F, 1e-6);
  EXPECT_FLOAT_EQ(p.data()[2], 0.5F);
}

TEST(Adam, ZeroLearningRateLeavesParams) {
  Tensor p = Tensor::from_data({2}, {1.0F, 2.0F}, true);
  backward(sum(mul(p, p)));
  std::vector<Tensor> params{p};
  AdamState st = AdamState::for_params(params, 0.0F);
  adam_step(params, st);
  EXPECT_EQ(p.data()[0], 1.0F);
  EXPECT_EQ(p.data()[1], 2.0F);
}

class GradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  const auto families = op_families();
  const auto& fam = families.at(static_cast<std::size_t>(GetParam()));
  Rng rng = make_rng(11, {static_cast<std::uint64_t>(GetParam())});
  for (int i = 0; i < 20; ++i) {
    OpCase c = fam.make(rng);
    const GradCheck g = gradcheck(c.fn, c.inputs, c.check, rng);
    EXPECT_LT(g.error, 1e-3) << fam.name << " " << c.shape << " input " << g.worst_input;
  }
}

INSTANTIATE_TEST_SUITE_P(Ops, GradientCheck, ::testing::Range(0, static_cast<int>(op_families().size())),
                         [](const auto& info) { return op_families().at(static_cast<std::size_t>(info.param)).name; });
