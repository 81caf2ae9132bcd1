#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "loss_oracle.hpp"
#include "superedge/model.hpp"

using namespace superedge;
using namespace superedge::testing;

namespace {

Image random_image(int h, int w, Rng& rng) {
  std::uniform_real_distribution<float> d(0.0F, 1.0F);
  Image img(h, w);
  for (auto& v : img.pixels()) v = d(rng);
  return img;
}

bool any_nonzero(std::span<const float> v) {
  return std::any_of(v.begin(), v.end(), [](float x) { return x != 0.0F; });
}

}  // namespace

TEST(Model, ShapeContract) {
  ModelParams p = ModelParams::create(1);
  Rng rng = make_rng(1, {1});
  NoGradGuard g;
  const ModelOutput a = forward(stack_images(std::vector{random_image(16, 16, rng)}), p, false);
  EXPECT_EQ(a.pixel_logits.shape(), (Shape{1, 65, 2, 2}));
  EXPECT_EQ(a.object_logits.shape(), (Shape{1, 65, 2, 2}));
  EXPECT_EQ(a.features.shape(), (Shape{1, 128, 2, 2}));
  const ModelOutput b = forward(stack_images(std::vector{random_image(24, 40, rng), random_image(24, 40, rng)}), p, false);
  EXPECT_EQ(b.pixel_logits.shape(), (Shape{2, 65, 3, 5}));
  EXPECT_EQ(b.features.shape(), (Shape{2, 128, 3, 5}));
  EXPECT_THROW(forward(stack_images(std::vector{random_image(12, 16, rng)}), p, false), ShapeError);
}

TEST(Model, ParameterInventory) {
  const ModelParams p = ModelParams::create(1);
  const auto named = p.named_tensors();
  std::set<std::string> names;
  for (const auto& [n, t] : named) names.insert(n);
  EXPECT_EQ(names.size(), named.size());
  // 12 ConvBn layers with 6 tensors each, plus the attention projection.
  EXPECT_EQ(named.size(), 12u * 6u + 2u);
  EXPECT_EQ(p.trainable().size(), 12u * 4u + 2u);
  EXPECT_EQ(p.encoder[0].weight.shape(), (Shape{64, 1, 3, 3}));
  EXPECT_EQ(p.encoder[7].weight.shape(), (Shape{128, 128, 3, 3}));
  EXPECT_EQ(p.pixel_hidden.weight.shape(), (Shape{256, 128, 3, 3}));
  EXPECT_EQ(p.pixel_out.weight.shape(), (Shape{65, 256, 1, 1}));
  EXPECT_EQ(p.object_qkv.weight.shape(), (Shape{195, 256, 1, 1}));
  EXPECT_EQ(p.attn_proj_weight.shape(), (Shape{65, 65, 1, 1}));
}

TEST(Model, HeInitStatistics) {
  const ModelParams p = ModelParams::create(3);
  const auto w = p.encoder[4].weight.data();  // 128×64×3×3, fan-in 576
  double s2 = 0.0;
  for (float v : w) s2 += static_cast<double>(v) * v;
  EXPECT_NEAR(s2 / w.size(), 2.0 / 576.0, 0.1 * 2.0 / 576.0);
  EXPECT_FALSE(any_nonzero(p.encoder[4].bias.data()));
  const ModelParams q = ModelParams::create(3);
  EXPECT_TRUE(std::equal(w.begin(), w.end(), q.encoder[4].weight.data().begin()));
}

TEST(Model, ZeroParamsGiveUniformMaps) {
  ModelParams p = ModelParams::zeros();
  Rng rng = make_rng(1, {2});
  const Prediction pr = predict(random_image(16, 24, rng), p);
  for (float v : pr.pixel.pixels()) EXPECT_NEAR(v, 1.0F / 65.0F, 1e-7);
  for (float v : pr.object.pixels()) EXPECT_NEAR(v, 1.0F / 65.0F, 1e-7);
}

TEST(Model, EvalModeIsDeterministicAndLeavesStatistics) {
  ModelParams p = ModelParams::create(2);
  Rng rng = make_rng(1, {3});
  const Image img = random_image(16, 16, rng);
  const Prediction a = predict(img, p), b = predict(img, p);
  EXPECT_EQ(a.pixel, b.pixel);
  EXPECT_EQ(a.object, b.object);
  const std::vector<float> before(p.encoder[0].running_mean.data().begin(), p.encoder[0].running_mean.data().end());
  NoGradGuard g;
  forward(stack_images(std::vector{img}), p, true);
  const auto after = p.encoder[0].running_mean.data();
  EXPECT_FALSE(std::equal(before.begin(), before.end(), after.begin()));
}

TEST(Model, PredictPadsAndCrops) {
  ModelParams p = ModelParams::create(2);
  Rng rng = make_rng(1, {4});
  const Prediction pr = predict(random_image(121, 161, rng), p);
  EXPECT_EQ(pr.pixel.height(), 121);
  EXPECT_EQ(pr.pixel.width(), 161);
  EXPECT_EQ(pr.object.height(), 121);
  EXPECT_EQ(pr.object.width(), 161);
}

TEST(Cells, EmptyAndSinglePixel) {
  Rng rng = make_rng(1, {5});
  const CellLabels e = edgemap_to_cells(EdgeMap(16, 24, 0.0F), rng);
  EXPECT_EQ(e.rows, 2);
  EXPECT_EQ(e.cols, 3);
  for (auto k : e.index) EXPECT_EQ(k, kDustbin);
  EdgeMap one(8, 8, 0.0F);
  one(3, 5) = 1.0F;
  const CellLabels l = edgemap_to_cells(one, rng);
  ASSERT_EQ(l.index.size(), 1u);
  EXPECT_EQ(l.index[0], 29);
  EXPECT_THROW(edgemap_to_cells(EdgeMap(8, 12), rng), ShapeError);
}

TEST(Cells, MultiplePositivesChosenUniformly) {
  EdgeMap m(8, 8, 0.0F);
  m(0, 0) = m(7, 7) = 1.0F;
  Rng rng = make_rng(1, {6});
  int first = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto k = edgemap_to_cells(m, rng).index[0];
    ASSERT_TRUE(k == 0 || k == 63);
    first += k == 0;
  }
  EXPECT_NEAR(static_cast<double>(first) / draws, 0.5, 0.03);
}

TEST(Cells, DecodePeakAndUniform) {
  std::vector<float> v(65, 0.0F);
  v[29] = 100.0F;
  const EdgeMap m = cells_to_edgemap(Tensor::from_data({1, 65, 1, 1}, v));
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) EXPECT_NEAR(m(y, x), (y == 3 && x == 5) ? 1.0F : 0.0F, 1e-6);
  }
  const EdgeMap u = cells_to_edgemap(Tensor::zeros({1, 65, 2, 3}));
  EXPECT_EQ(u.height(), 16);
  EXPECT_EQ(u.width(), 24);
  for (float x : u.pixels()) EXPECT_NEAR(x, 1.0F / 65.0F, 1e-7);
}

TEST(Cells, DepthToSpaceMatchesIndexOracle) {
  Rng rng = make_rng(1, {7});
  const Tensor logits = random_logits({2, 65, 2, 3}, rng);
  const auto maps = cells_to_edgemaps(logits);
  ASSERT_EQ(maps.size(), 2u);
  for (int n = 0; n < 2; ++n) {
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 3; ++c) {
        for (int k = 0; k < 64; ++k) {
          const double p = std::exp(-cell_ce(logits, n, r, c, k));
          EXPECT_NEAR(maps[n](8 * r + k / 8, 8 * c + k % 8), p, 1e-6);
        }
      }
    }
  }
}

TEST(Cells, OneHotRoundTrip) {
  Rng rng = make_rng(1, {8});
  for (int trial = 0; trial < 20; ++trial) {
    // At most one edge pixel per cell.
    EdgeMap m(16, 24, 0.0F);
    std::uniform_int_distribution<int> pos(0, 64);
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 3; ++c) {
        const int k = pos(rng);
        if (k < 64) m(8 * r + k / 8, 8 * c + k % 8) = 1.0F;
      }
    }
    const CellLabels l = edgemap_to_cells(m, rng);
    std::vector<float> v(65 * 6, 0.0F);
    for (int cell = 0; cell < 6; ++cell) v[static_cast<std::size_t>(l.index[cell]) * 6 + cell] = 100.0F;
    const EdgeMap back = cells_to_edgemap(Tensor::from_data({1, 65, 2, 3}, v));
    for (std::size_t i = 0; i < m.size(); ++i) ASSERT_NEAR(back.pixels()[i], m.pixels()[i], 1e-6);
  }
}

TEST(Loss, PixelUniformAndOneHot) {
  Rng rng = make_rng(1, {9});
  const CellLabels l = random_cells(2, 2, rng);
  EXPECT_NEAR(loss_pix(Tensor::zeros({1, 65, 2, 2}), std::vector{l}).item(), std::log(65.0), 1e-5);
  std::vector<float> v(65 * 4, 0.0F);
  for (int cell = 0; cell < 4; ++cell) v[static_cast<std::size_t>(l.index[cell]) * 4 + cell] = 100.0F;
  EXPECT_LT(loss_pix(Tensor::from_data({1, 65, 2, 2}, v), std::vector{l}).item(), 1e-6);
}

TEST(Loss, PixelMatchesScalarOracle) {
  Rng rng = make_rng(1, {10});
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor z = random_logits({1, 65, 2, 2}, rng);
    const CellLabels l = random_cells(2, 2, rng);
    // 64/(H·W) with H = W = 16.
    double want = 0.0;
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) want += cell_ce(z, 0, r, c, l.index[r * 2 + c]);
    }
    want *= 64.0 / 256.0;
    EXPECT_NEAR(loss_pix(z, std::vector{l}).item(), want, 1e-5);
  }
}

TEST(Loss, ObjectWeightsIdentities) {
  const EdgeMap quarter = map_with_fraction(16, 16, 64);
  ASSERT_EQ(count_on(quarter), 64u);
  const ObjectWeights w = object_class_weights(quarter, 1.1F);
  EXPECT_NEAR(w.alpha, 0.275, 1e-7);
  EXPECT_NEAR(w.beta, 0.75, 1e-12);
  Rng rng = make_rng(1, {11});
  std::uniform_int_distribution<int> count(0, 256);
  for (int trial = 0; trial < 100; ++trial) {
    const int pos = count(rng);
    const float lambda = std::uniform_real_distribution<float>(0.5F, 2.0F)(rng);
    const ObjectWeights o = object_class_weights(map_with_fraction(16, 16, pos), lambda);
    const double neg = 256 - count_on(map_with_fraction(16, 16, pos));
    const double p = 256 - neg;
    EXPECT_NEAR(o.alpha * (p + neg), static_cast<double>(lambda) * p, 1e-6);
    EXPECT_NEAR(o.beta * (p + neg), neg, 1e-6);
  }
  // lambda·|Y+| = |Y-| balances the branches.
  const ObjectWeights eq = object_class_weights(map_with_fraction(16, 16, 128), 1.0F);
  EXPECT_DOUBLE_EQ(eq.alpha, eq.beta);
  const ObjectWeights full = object_class_weights(EdgeMap(8, 8, 1.0F), 1.1F);
  EXPECT_NEAR(full.alpha, 1.1, 1e-7);
  EXPECT_EQ(full.beta, 0.0);
}

TEST(Loss, ObjectMatchesScalarOracle) {
  Rng rng = make_rng(1, {12});
  const EdgeMap quarter = map_with_fraction(16, 16, 64);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor z = random_logits({1, 65, 2, 2}, rng);
    const CellLabels l = random_cells(2, 2, rng);
    double want = 0.0;
    for (int cell = 0; cell < 4; ++cell) {
      const double w = l.index[cell] == kDustbin ? 0.275 : 0.75;
      want += w * cell_ce(z, 0, cell / 2, cell % 2, l.index[cell]);
    }
    EXPECT_NEAR(loss_obj(z, std::vector{l}, std::vector{quarter}, {1.1F}).item(), want, 1e-5);
  }
}

TEST(Loss, ObjectEmptyPseudoGtIsZero) {
  Rng rng = make_rng(1, {13});
  const Tensor z = random_logits({1, 65, 2, 2}, rng);
  const CellLabels l = edgemap_to_cells(EdgeMap(16, 16, 0.0F), rng);
  EXPECT_EQ(loss_obj(z, std::vector{l}, std::vector{EdgeMap(16, 16, 0.0F)}, {}).item(), 0.0F);
}

TEST(Loss, TotalIsSumAndGradientsReachBothHeads) {
  EXPECT_EQ(loss_total(Tensor::scalar(0.0F), Tensor::scalar(0.0F)).item(), 0.0F);
  EXPECT_EQ(loss_total(Tensor::scalar(1.5F), Tensor::scalar(2.5F)).item(), 4.0F);

  ModelParams p = ModelParams::create(4);
  for (auto& t : p.trainable()) {
    Tensor tt = t;
    tt.set_requires_grad(true);
  }
  Rng rng = make_rng(1, {14});
  std::vector<Image> imgs{random_image(16, 16, rng), random_image(16, 16, rng)};
  std::vector<EdgeMap> maps;
  std::vector<CellLabels> labels;
  for (int i = 0; i < 2; ++i) {
    EdgeMap m(16, 16, 0.0F);
    for (int x = 0; x < 16; ++x) m(5 + i, x) = 1.0F;
    labels.push_back(edgemap_to_cells(m, rng));
    maps.push_back(m);
  }
  const ModelOutput out = forward(stack_images(imgs), p, true);
  backward(loss_total(loss_pix(out.pixel_logits, labels), loss_obj(out.object_logits, labels, maps, {})));
  for (const Tensor* t : {&p.pixel_out.weight, &p.pixel_hidden.weight, &p.object_qkv.weight, &p.object_hidden.weight,
                          &p.attn_proj_weight, &p.encoder[0].weight}) {
    ASSERT_TRUE(t->has_grad());
    EXPECT_TRUE(any_nonzero(t->grad()));
  }
}

TEST(Loss, RejectsMismatchedLabels) {
  Rng rng = make_rng(1, {15});
  const CellLabels l = random_cells(2, 3, rng);
  EXPECT_THROW(loss_pix(Tensor::zeros({1, 65, 2, 2}), std::vector{l}), ShapeError);
  EXPECT_THROW(loss_pix(Tensor::zeros({2, 65, 2, 3}), std::vector{l}), ShapeError);
}

namespace {

TrainingBatch tiny_batch(Rng& rng) {
  TrainingBatch b;
  std::vector<Image> imgs;
  for (int i = 0; i < 2; ++i) {
    Image img(16, 16, 0.2F);
    EdgeMap m(16, 16, 0.0F);
    for (int y = 4 + i; y < 12; ++y) {
      for (int x = 3; x < 11 + i; ++x) img(y, x) = 0.8F;
    }
    for (int x = 3; x < 11 + i; ++x) m(4 + i, x) = 1.0F;
    imgs.push_back(img);
    b.pixel_labels.push_back(edgemap_to_cells(m, rng));
    b.object_labels.push_back(edgemap_to_cells(dilate(m, 1), rng));
    b.object_maps.push_back(dilate(m, 1));
  }
  b.images = stack_images(imgs);
  return b;
}

}  // namespace

TEST(TrainStep, ZeroLearningRateKeepsParams) {
  ModelParams p = ModelParams::create(5);
  const ModelParams ref = ModelParams::create(5);
  Rng rng = make_rng(1, {16});
  const TrainingBatch b = tiny_batch(rng);
  auto params = p.trainable();
  AdamState adam = AdamState::for_params(params, 0.0F);
  train_step(b, p, adam, {});
  const auto a = p.trainable(), r = ref.trainable();
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(std::equal(a[i].data().begin(), a[i].data().end(), r[i].data().begin())) << i;
  }
}

TEST(TrainStep, DeterministicTrajectory) {
  std::vector<double> runs[2];
  for (auto& run : runs) {
    ModelParams p = ModelParams::create(6);
    Rng rng = make_rng(1, {17});
    const TrainingBatch b = tiny_batch(rng);
    auto params = p.trainable();
    AdamState adam = AdamState::for_params(params);
    for (int s = 0; s < 4; ++s) run.push_back(train_step(b, p, adam, {}).total());
  }
  for (std::size_t i = 0; i < runs[0].size(); ++i) EXPECT_EQ(runs[0][i], runs[1][i]) << "step " << i;
  EXPECT_LT(runs[0].back(), runs[0].front());
}

TEST(TrainStep, NonFiniteLossAborts) {
  ModelParams p = ModelParams::create(7);
  Rng rng = make_rng(1, {18});
  const TrainingBatch b = tiny_batch(rng);
  p.attn_proj_bias.data()[3] = std::numeric_limits<float>::quiet_NaN();
  auto params = p.trainable();
  AdamState adam = AdamState::for_params(params);
  EXPECT_THROW(train_step(b, p, adam, {}), NumericalError);
}
