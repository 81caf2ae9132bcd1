#include <gtest/gtest.h>

#include <cmath>

#include "homography_oracle.hpp"
#include "superedge/homography.hpp"
#include "superedge/random.hpp"

using namespace superedge;
using namespace superedge::testing;

namespace {

Image smooth_image(int h, int w) {
  Image img(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img(y, x) = 0.5F + 0.4F * static_cast<float>(std::sin(0.15 * x) * std::cos(0.11 * y));
    }
  }
  return img;
}

AnnotatorConfig still_config() {
  AnnotatorConfig c;
  c.rotation_max_deg = 0;
  c.scale_min = c.scale_max = 1.0;
  c.perspective_amp = 0;
  c.translation_frac = 0;
  return c;
}

}  // namespace

TEST(Homography, RejectsSingularMatrix) {
  EXPECT_THROW(Homography({1, 2, 0, 2, 4, 0, 0, 0, 1}), std::invalid_argument);
  EXPECT_THROW(Homography({1, 0, 0, 0, 1, 0, 0, 0, 0}), std::invalid_argument);
}

TEST(Homography, NormalizesAndInverts) {
  const Homography h({2, 0.1, 3, -0.2, 1.5, 1, 0.001, 0.002, 2});
  EXPECT_DOUBLE_EQ(h(2, 2), 1.0);
  const Homography id = h.inverse() * h;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(id(r, c), r == c ? 1.0 : 0.0, 1e-6);
  }
  const auto [x, y] = h.apply(3.0, -2.0);
  const auto [bx, by] = h.inverse().apply(x, y);
  EXPECT_NEAR(bx, 3.0, 1e-9);
  EXPECT_NEAR(by, -2.0, 1e-9);
}

TEST(Homography, FromCornersHitsCorners) {
  const std::array<std::pair<double, double>, 4> c{{{0.05, -0.02}, {1.03, 0.04}, {0.97, 1.08}, {-0.06, 0.95}}};
  const Homography h = homography_from_corners(c);
  const std::array<std::pair<double, double>, 4> unit{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
  for (int i = 0; i < 4; ++i) {
    const auto [x, y] = h.apply(unit[i].first, unit[i].second);
    EXPECT_NEAR(x, c[i].first, 1e-12);
    EXPECT_NEAR(y, c[i].second, 1e-12);
  }
}

TEST(SampleHomography, ZeroAmplitudesGiveIdentity) {
  Rng rng = make_rng(1, {1});
  EXPECT_EQ(sample_homography(still_config(), rng), Homography::identity());
}

TEST(SampleHomography, PureScaleFixesCenter) {
  AnnotatorConfig c = still_config();
  c.scale_min = c.scale_max = 1.25;
  Rng rng = make_rng(1, {2});
  const Homography h = sample_homography(c, rng);
  const auto [x, y] = h.apply(0.5, 0.5);
  EXPECT_NEAR(x, 0.5, 1e-12);
  EXPECT_NEAR(y, 0.5, 1e-12);
  const auto [cx, cy] = h.apply(0.0, 0.0);
  EXPECT_NEAR(cx, -0.125, 1e-12);
  EXPECT_NEAR(cy, -0.125, 1e-12);
}

TEST(SampleHomography, ScaleTwoLeavesCornerBoundAndIsRejected) {
  // Corners land at -0.5 and 1.5, outside [-0.3, 1.3], on every draw.
  AnnotatorConfig c = still_config();
  c.scale_min = c.scale_max = 2.0;
  Rng rng = make_rng(1, {3});
  EXPECT_THROW(sample_homography(c, rng), std::runtime_error);
}

TEST(SampleHomography, DeterministicAndWithinCornerBound) {
  AnnotatorConfig c;
  Rng a = make_rng(77, {streams::kHomography});
  Rng b = make_rng(77, {streams::kHomography});
  for (int i = 0; i < 200; ++i) {
    const Homography h = sample_homography(c, a);
    EXPECT_EQ(h, sample_homography(c, b));
    EXPECT_GT(std::abs(h.determinant()), 1e-8);
    for (auto [x, y] : {std::pair{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}}) {
      const auto [u, v] = h.apply(x, y);
      EXPECT_GE(u, -0.3);
      EXPECT_LE(u, 1.3);
      EXPECT_GE(v, -0.3);
      EXPECT_LE(v, 1.3);
    }
  }
}

TEST(AnnotatorConfig, Validation) {
  AnnotatorConfig c;
  EXPECT_NO_THROW(c.validate());
  c.n_homographies = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.scale_min = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.perspective_amp = -0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(PixelFrame, MapsUnitCornersToPixelCorners) {
  const Homography h = to_pixel_frame(Homography::translation(0.5, 0.0), 10, 21);
  const auto [x, y] = h.apply(0.0, 0.0);
  EXPECT_NEAR(x, 10.0, 1e-12);  // 0.5 * (21 - 1)
  EXPECT_NEAR(y, 0.0, 1e-12);
}

TEST(WarpImage, IdentityIsExact) {
  Rng rng = make_rng(2, {1});
  const Image img = random_image(13, 17, rng);
  const auto w = warp_image(img, Homography::identity());
  EXPECT_EQ(w.raster, img);
  for (float v : w.valid.pixels()) EXPECT_EQ(v, 1.0F);
}

TEST(WarpImage, IntegerShift) {
  Rng rng = make_rng(2, {2});
  const Image img = random_image(9, 12, rng);
  const auto w = warp_image(img, Homography::translation(2.0, 0.0));
  for (int y = 0; y < 9; ++y) {
    for (int x = 0; x < 12; ++x) {
      if (x < 2) {
        EXPECT_EQ(w.valid(y, x), 0.0F);
        EXPECT_EQ(w.raster(y, x), 0.0F);
      } else {
        EXPECT_EQ(w.valid(y, x), 1.0F);
        EXPECT_EQ(w.raster(y, x), img(y, x - 2));
      }
    }
  }
}

TEST(WarpImage, RoundTripOnSmoothImage) {
  const Image img = smooth_image(60, 80);
  AnnotatorConfig c;
  Rng rng = make_rng(2, {3});
  for (int i = 0; i < 10; ++i) {
    const Homography h = to_pixel_frame(sample_homography(c, rng), 60, 80);
    const auto there = warp_image(img, h);
    const auto back = warp_image(there.raster, h.inverse());
    const auto back_valid = warp_image(there.valid, h.inverse());
    for (int y = 3; y < 57; ++y) {
      for (int x = 3; x < 77; ++x) {
        if (back.valid(y, x) == 0.0F || back_valid.raster(y, x) < 1.0F) continue;
        EXPECT_NEAR(back.raster(y, x), img(y, x), 2e-2);
      }
    }
  }
}

TEST(HomographyAdapt, SingleIdentityEqualsPredictor) {
  Rng rng = make_rng(2, {4});
  AnnotatorConfig c;
  c.n_homographies = 1;
  for (int i = 0; i < 20; ++i) {
    const Image img = random_image(24, 32, rng);
    EXPECT_EQ(homography_adapt(img, toy_predictor, c), toy_predictor(img));
  }
}

TEST(HomographyAdapt, ExtraIdentitiesChangeNothing) {
  Rng rng = make_rng(2, {5});
  const Image img = random_image(20, 20, rng);
  const std::vector<Homography> one{Homography::identity()};
  const std::vector<Homography> three(3, Homography::identity());
  const EdgeMap a = homography_adapt(img, toy_predictor, one);
  const EdgeMap b = homography_adapt(img, toy_predictor, three);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.pixels()[i], b.pixels()[i], 1e-7);
}

TEST(HomographyAdapt, ConstantPredictor) {
  Rng rng = make_rng(2, {6});
  AnnotatorConfig c;
  c.n_homographies = 8;
  c.rng_seed = 4;
  const Image img = random_image(32, 40, rng);
  const EdgeMap out = homography_adapt(img, [](const Image& i) { return EdgeMap(i.height(), i.width(), 0.3F); }, c);
  // The identity term covers every pixel, so every pixel is at least partly covered.
  for (float v : out.pixels()) EXPECT_NEAR(v, 0.3F, 1e-6);
}

TEST(HomographyAdapt, MatchesPerPixelOracle) {
  Rng rng = make_rng(2, {7});
  for (int trial = 0; trial < 10; ++trial) {
    AnnotatorConfig c;
    c.n_homographies = 3;
    c.rng_seed = 100 + trial;
    const Image img = random_image(16, 16, rng);
    const auto hs = sample_adaptation_set(c, 16, 16);
    ASSERT_EQ(hs.size(), 3u);
    EXPECT_EQ(hs[0], Homography::identity());
    const EdgeMap got = homography_adapt(img, toy_predictor, c);
    const EdgeMap want = oracle_adapt(img, hs, toy_predictor);
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got.pixels()[i], want.pixels()[i], 1e-6) << i;
    for (float v : got.pixels()) {
      EXPECT_GE(v, 0.0F);
      EXPECT_LE(v, 1.0F);
    }
  }
}

TEST(HomographyAdapt, RejectsMismatchedPredictor) {
  AnnotatorConfig c;
  c.n_homographies = 1;
  EXPECT_THROW(homography_adapt(Image(8, 8), [](const Image&) { return EdgeMap(4, 4); }, c), ShapeError);
}
