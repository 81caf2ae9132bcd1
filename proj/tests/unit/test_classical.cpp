#include <gtest/gtest.h>

#include <deque>

#include "superedge/classical.hpp"
#include "superedge/evaluation.hpp"
#include "superedge/random.hpp"
#include "superedge/synthetic.hpp"

using namespace superedge;

namespace {

Image step_image(int h, int w, int column) {
  Image img(h, w, 0.0F);
  for (int y = 0; y < h; ++y) {
    for (int x = column; x < w; ++x) img(y, x) = 1.0F;
  }
  return img;
}

// Piecewise-constant blocks plus Gaussian noise.
Image blocks_with_noise(int h, int w, Rng& rng, float noise) {
  std::uniform_real_distribution<float> level(0.1F, 0.9F);
  std::normal_distribution<float> n(0.0F, noise);
  const float a = level(rng), b = level(rng), c = level(rng);
  Image img(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float base = x < w / 2 ? a : (y < h / 2 ? b : c);
      img(y, x) = std::clamp(base + n(rng), 0.0F, 1.0F);
    }
  }
  return img;
}

}  // namespace

TEST(Canny, ConstantImageHasNoEdges) {
  EXPECT_EQ(count_on(canny(Image(32, 32, 0.6F), 0.1F, 0.3F)), 0u);
}

TEST(Canny, VerticalStepGivesOneLine) {
  const Image img = step_image(32, 40, 20);
  const EdgeMap e = canny(img, 0.1F, 0.3F);
  for (int y = 0; y < 32; ++y) {
    int on = 0;
    for (int x = 0; x < 40; ++x) {
      if (e(y, x) > 0.5F) {
        ++on;
        EXPECT_GE(x, 19);
        EXPECT_LE(x, 21);
      }
    }
    EXPECT_EQ(on, 1) << "row " << y;
  }
}

TEST(Canny, RejectsInvertedThresholds) {
  EXPECT_THROW(canny(Image(8, 8), 0.5F, 0.2F), std::invalid_argument);
  EXPECT_THROW(canny(Image(8, 8), -0.1F, 0.2F), std::invalid_argument);
}

TEST(Canny, FilledSquareMatchesPerimeter) {
  ShapeSpec sq{ShapeKind::kPolygon, {{22, 22}, {42, 22}, {42, 42}, {22, 42}}, 0, 0, 0, 0, {0.9F}};
  const Image img = render_shapes(64, 64, {sq}, 0.1F);
  const EdgeMap e = canny(img, 0.1F, 0.2F);
  const EvalReport r = evaluate_dataset(std::vector{e}, std::vector{rasterize_outline(sq, 64, 64)});
  EXPECT_GE(r.ods, 0.95);
  // Every edge pixel lies within one pixel of the perimeter.
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      if (e(y, x) < 0.5F) continue;
      const bool near_x = std::abs(x - 22) <= 1 || std::abs(x - 42) <= 1;
      const bool near_y = std::abs(y - 22) <= 1 || std::abs(y - 42) <= 1;
      EXPECT_TRUE(near_x || near_y) << y << "," << x;
    }
  }
}

TEST(Canny, HysteresisAndNonMaximumProperties) {
  Rng rng = make_rng(9, {1});
  for (int trial = 0; trial < 10; ++trial) {
    const Image img = blocks_with_noise(48, 48, rng, 0.05F);
    const float low = 0.1F, high = 0.3F;
    const EdgeMap e = canny(img, low, high);
    for (float v : e.pixels()) ASSERT_TRUE(v == 0.0F || v == 1.0F);

    // Recompute the normalized, smoothed gradient magnitude to find strong pixels.
    const SobelGradients g = sobel(gaussian_blur(img, 1.0F));
    float mx = 0.0F;
    for (float v : g.magnitude.pixels()) mx = std::max(mx, v);
    // Every retained pixel reaches a strong retained pixel through retained pixels.
    EdgeMap reach(48, 48, 0.0F);
    std::deque<std::pair<int, int>> queue;
    for (int y = 0; y < 48; ++y) {
      for (int x = 0; x < 48; ++x) {
        if (e(y, x) > 0.5F && g.magnitude(y, x) >= high * mx) {
          reach(y, x) = 1.0F;
          queue.emplace_back(y, x);
        }
      }
    }
    while (!queue.empty()) {
      const auto [y, x] = queue.front();
      queue.pop_front();
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (e.contains(y + dy, x + dx) && e(y + dy, x + dx) > 0.5F && reach(y + dy, x + dx) == 0.0F) {
            reach(y + dy, x + dx) = 1.0F;
            queue.emplace_back(y + dy, x + dx);
          }
        }
      }
    }
    EXPECT_EQ(reach, e);
  }
}

TEST(Sobel, KnownKernelResponse) {
  const SobelGradients g = sobel(step_image(5, 6, 3));
  // Interior column left of the step: [-1 0 1; -2 0 2; -1 0 1] sums to 4.
  EXPECT_FLOAT_EQ(g.gx(2, 2), 4.0F);
  EXPECT_FLOAT_EQ(g.gy(2, 2), 0.0F);
  EXPECT_FLOAT_EQ(g.magnitude(2, 3), 4.0F);
  EXPECT_FLOAT_EQ(g.magnitude(2, 0), 0.0F);
}

TEST(L0Smooth, ConstantImageIsFixedPoint) {
  const Image img(24, 24, 0.42F);
  EXPECT_EQ(l0_smooth(img, 0.02F), img);
}

TEST(L0Smooth, TwoRegionImageStaysPut) {
  Image img(32, 32, 0.2F);
  for (int y = 0; y < 32; ++y) {
    for (int x = 16; x < 32; ++x) img(y, x) = 0.8F;
  }
  const Image out = l0_smooth(img, 0.02F);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(out.pixels()[i], img.pixels()[i], 1e-2);
}

TEST(L0Smooth, RampCollapsesTowardPiecewiseConstant) {
  Image img(32, 32);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) img(y, x) = static_cast<float>(x) / 31.0F;
  }
  const Image out = l0_smooth(img, 0.5F);
  EXPECT_LT(count_nonzero_gradients(out), count_nonzero_gradients(img));
}

TEST(L0Smooth, EnergyTraceNonIncreasing) {
  Rng rng = make_rng(9, {2});
  for (float lambda : {0.01F, 0.02F, 0.05F}) {
    const Image img = blocks_with_noise(32, 32, rng, 0.03F);
    L0Options o;
    o.lambda = lambda;
    const L0Result r = l0_smooth_traced(img, o);
    ASSERT_GE(r.energy.size(), 2u);
    EXPECT_DOUBLE_EQ(r.energy.front(), l0_energy(img, img, lambda));
    for (std::size_t i = 1; i < r.energy.size(); ++i) EXPECT_LE(r.energy[i], r.energy[i - 1]) << "round " << i;
    EXPECT_NEAR(r.energy.back(), l0_energy(r.image, img, lambda), 1e-6 * r.energy.back() + 1e-9);
  }
}

TEST(L0Smooth, DoesNotAddGradients) {
  Rng rng = make_rng(9, {3});
  for (int trial = 0; trial < 5; ++trial) {
    const Image img = blocks_with_noise(32, 32, rng, 0.04F);
    EXPECT_LE(count_nonzero_gradients(l0_smooth(img, 0.01F)), count_nonzero_gradients(img));
  }
}

TEST(L0Smooth, EnergyCountsForwardDifferences) {
  Image s(2, 2, std::vector<float>{0.0F, 1.0F, 0.0F, 0.0F});
  // (0,0) has a nonzero x difference, (0,1) a nonzero y difference.
  EXPECT_EQ(count_nonzero_gradients(s), 2u);
  EXPECT_DOUBLE_EQ(l0_energy(s, s, 0.5F), 1.0);
  EXPECT_THROW(l0_smooth(s, 0.0F), std::invalid_argument);
}
