#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "superedge/homography.hpp"
#include "superedge/random.hpp"

// Homography adaptation recomputed from scratch: own matrix inverse,
// projection, bilinear sampling and per-pixel accumulation.
namespace superedge::testing {

inline Image random_image(int h, int w, Rng& rng) {
  std::uniform_real_distribution<float> d(0.0F, 1.0F);
  Image img(h, w);
  for (auto& v : img.pixels()) v = d(rng);
  return img;
}

// Local contrast with a position-dependent offset so that border
// predictions are nonzero.
inline EdgeMap toy_predictor(const Image& img) {
  EdgeMap out(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const float g = std::abs(img.clamped(y, x + 1) - img.clamped(y, x - 1)) +
                      std::abs(img.clamped(y + 1, x) - img.clamped(y - 1, x));
      out(y, x) = std::min(1.0F, 0.5F * g + 0.01F * static_cast<float>((x + 2 * y) % 7));
    }
  }
  return out;
}

using Mat3 = std::array<double, 9>;

inline Mat3 oracle_inverse(const Mat3& m) {
  const double a = m[0], b = m[1], c = m[2], d = m[3], e = m[4], f = m[5], g = m[6], h = m[7], i = m[8];
  const double det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
  return {(e * i - f * h) / det, (c * h - b * i) / det, (b * f - c * e) / det,
          (f * g - d * i) / det, (a * i - c * g) / det, (c * d - a * f) / det,
          (d * h - e * g) / det, (b * g - a * h) / det, (a * e - b * d) / det};
}

inline std::pair<double, double> oracle_project(const Mat3& m, double x, double y) {
  const double w = m[6] * x + m[7] * y + m[8];
  return {(m[0] * x + m[1] * y + m[2]) / w, (m[3] * x + m[4] * y + m[5]) / w};
}

inline bool oracle_inside(double x, double y, int h, int w) { return x >= 0 && x <= w - 1 && y >= 0 && y <= h - 1; }

template <class R>
inline double oracle_bilinear(const R& r, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  auto at = [&](int yy, int xx) {
    return static_cast<double>(r(std::min(yy, r.height() - 1), std::min(xx, r.width() - 1)));
  };
  return (1 - fx) * (1 - fy) * at(y0, x0) + fx * (1 - fy) * at(y0, x0 + 1) + (1 - fx) * fy * at(y0 + 1, x0) +
         fx * fy * at(y0 + 1, x0 + 1);
}

// Per-pixel masked average of back-projected predictions.
inline EdgeMap oracle_adapt(const Image& img, const std::vector<Homography>& hs, const EdgePredictor& predictor) {
  const int h = img.height(), w = img.width();
  std::vector<double> num(img.size(), 0.0), den(img.size(), 0.0);
  for (const auto& hom : hs) {
    const Mat3 fwd = hom.matrix();
    const Mat3 inv = oracle_inverse(fwd);
    Image warped(h, w, 0.0F);
    EdgeMap valid(h, w, 0.0F);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto [sx, sy] = oracle_project(inv, x, y);
        if (!oracle_inside(sx, sy, h, w)) continue;
        warped(y, x) = static_cast<float>(oracle_bilinear(img, sx, sy));
        valid(y, x) = 1.0F;
      }
    }
    const EdgeMap pred = predictor(warped);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        // Unwarping by the inverse samples the warped frame at fwd(p).
        const auto [qx, qy] = oracle_project(fwd, x, y);
        if (!oracle_inside(qx, qy, h, w)) continue;
        const double m = static_cast<float>(oracle_bilinear(valid, qx, qy));
        const double b = static_cast<float>(oracle_bilinear(pred, qx, qy));
        num[y * w + x] += m * b;
        den[y * w + x] += m;
      }
    }
  }
  EdgeMap out(h, w, 0.0F);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (den[i] > 0) out.pixels()[i] = static_cast<float>(num[i] / den[i]);
  }
  return out;
}

}  // namespace superedge::testing
