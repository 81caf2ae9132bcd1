#include "superedge/homography.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace superedge {

Homography::Homography(const std::array<double, 9>& m) : m_(m) {
  if (m_[8] == 0.0 || !std::isfinite(m_[8])) throw std::invalid_argument("homography: m[2][2] must be finite and nonzero");
  if (m_[8] != 1.0) {
    const double s = m_[8];
    for (auto& v : m_) v /= s;
  }
  if (!(std::abs(determinant()) > 1e-8)) throw std::invalid_argument("homography: matrix is singular");
}

Homography Homography::translation(double tx, double ty) { return Homography({1, 0, tx, 0, 1, ty, 0, 0, 1}); }

Homography Homography::scaling(double sx, double sy) { return Homography({sx, 0, 0, 0, sy, 0, 0, 0, 1}); }

double Homography::determinant() const {
  const auto& a = m_;
  return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) + a[2] * (a[3] * a[7] - a[4] * a[6]);
}

Homography Homography::inverse() const {
  const auto& a = m_;
  const double det = determinant();
  std::array<double, 9> inv{
      (a[4] * a[8] - a[5] * a[7]) / det, (a[2] * a[7] - a[1] * a[8]) / det, (a[1] * a[5] - a[2] * a[4]) / det,
      (a[5] * a[6] - a[3] * a[8]) / det, (a[0] * a[8] - a[2] * a[6]) / det, (a[2] * a[3] - a[0] * a[5]) / det,
      (a[3] * a[7] - a[4] * a[6]) / det, (a[1] * a[6] - a[0] * a[7]) / det, (a[0] * a[4] - a[1] * a[3]) / det};
  return Homography(inv);
}

Homography Homography::operator*(const Homography& rhs) const {
  std::array<double, 9> out{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += m_[r * 3 + k] * rhs.m_[k * 3 + c];
      out[r * 3 + c] = acc;
    }
  }
  return Homography(out);
}

std::pair<double, double> Homography::apply(double x, double y) const {
  const double w = m_[6] * x + m_[7] * y + m_[8];
  return {(m_[0] * x + m_[1] * y + m_[2]) / w, (m_[3] * x + m_[4] * y + m_[5]) / w};
}

Homography homography_from_corners(const std::array<std::pair<double, double>, 4>& corners) {
  static constexpr double kSrc[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double x = kSrc[i][0], y = kSrc[i][1];
    const auto [u, v] = corners[i];
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  const Eigen::Matrix<double, 8, 1> h = a.fullPivLu().solve(b);
  return Homography({h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0});
}

void AnnotatorConfig::validate() const {
  if (n_homographies < 1) throw std::invalid_argument("annotator: n_homographies must be >= 1");
  if (scale_min > scale_max) throw std::invalid_argument("annotator: scale_min exceeds scale_max");
  if (!(scale_min > 0.0)) throw std::invalid_argument("annotator: scale_min must be positive");
  if (rotation_max_deg < 0.0 || perspective_amp < 0.0 || translation_frac < 0.0) {
    throw std::invalid_argument("annotator: amplitudes must be non-negative");
  }
}

namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

bool corners_in_bounds(const Homography& h) {
  static constexpr double kCorners[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  for (const auto& c : kCorners) {
    const double w = h(2, 0) * c[0] + h(2, 1) * c[1] + h(2, 2);
    if (!(w > 0.0)) return false;
    const auto [x, y] = h.apply(c[0], c[1]);
    if (!(x >= -0.3 && x <= 1.3 && y >= -0.3 && y <= 1.3)) return false;
  }
  return true;
}

}  // namespace

Homography sample_homography(const AnnotatorConfig& cfg, Rng& rng) {
  cfg.validate();
  for (int attempt = 0; attempt < 100; ++attempt) {
    const double theta = uniform(rng, -cfg.rotation_max_deg, cfg.rotation_max_deg) * std::numbers::pi / 180.0;
    const double s = uniform(rng, cfg.scale_min, cfg.scale_max);
    const double tx = uniform(rng, -cfg.translation_frac, cfg.translation_frac);
    const double ty = uniform(rng, -cfg.translation_frac, cfg.translation_frac);
    std::array<std::pair<double, double>, 4> corners{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}};
    for (auto& [x, y] : corners) {
      x += uniform(rng, -cfg.perspective_amp, cfg.perspective_amp);
      y += uniform(rng, -cfg.perspective_amp, cfg.perspective_amp);
    }

    const double c = std::cos(theta), sn = std::sin(theta);
    const Homography rs({s * c, -s * sn, 0, s * sn, s * c, 0, 0, 0, 1});
    Homography h = Homography::translation(0.5 + tx, 0.5 + ty) * rs * Homography::translation(-0.5, -0.5);
    if (cfg.perspective_amp > 0.0) {
      try {
        h = h * homography_from_corners(corners);
      } catch (const std::invalid_argument&) {
        continue;
      }
    }
    if (corners_in_bounds(h)) return h;
  }
  throw std::runtime_error("sample_homography: corner bound violated after 100 draws; sampling ranges are too wide");
}

Homography to_pixel_frame(const Homography& normalized, int height, int width) {
  if (height < 2 || width < 2) throw ShapeError("to_pixel_frame: image must be at least 2x2");
  const double sx = width - 1.0, sy = height - 1.0;
  return Homography::scaling(sx, sy) * normalized * Homography::scaling(1.0 / sx, 1.0 / sy);
}

template <class Tag>
Warped<Tag> warp_image(const Raster<Tag>& src, const Homography& h) {
  const int hh = src.height(), ww = src.width();
  const Homography inv = h.inverse();
  Warped<Tag> out{Raster<Tag>(hh, ww), EdgeMap(hh, ww)};
  for (int y = 0; y < hh; ++y) {
    for (int x = 0; x < ww; ++x) {
      const auto [sx, sy] = inv.apply(x, y);
      if (!(sx >= 0.0 && sx <= ww - 1.0 && sy >= 0.0 && sy <= hh - 1.0)) continue;
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      const int x1 = x0 + 1 < ww ? x0 + 1 : x0, y1 = y0 + 1 < hh ? y0 + 1 : y0;
      const double v = (1.0 - fx) * (1.0 - fy) * src(y0, x0) + fx * (1.0 - fy) * src(y0, x1) +
                       (1.0 - fx) * fy * src(y1, x0) + fx * fy * src(y1, x1);
      out.raster(y, x) = static_cast<float>(v);
      out.valid(y, x) = 1.0F;
    }
  }
  return out;
}

template Warped<ImageTag> warp_image(const Image&, const Homography&);
template Warped<EdgeTag> warp_image(const EdgeMap&, const Homography&);
template Warped<FieldTag> warp_image(const Field&, const Homography&);

std::vector<Homography> sample_adaptation_set(const AnnotatorConfig& cfg, int height, int width) {
  cfg.validate();
  std::vector<Homography> out;
  out.reserve(cfg.n_homographies);
  out.push_back(Homography::identity());
  if (cfg.n_homographies == 1) return out;
  Rng rng = make_rng(cfg.rng_seed, {streams::kHomography});
  for (int i = 1; i < cfg.n_homographies; ++i) out.push_back(to_pixel_frame(sample_homography(cfg, rng), height, width));
  return out;
}

EdgeMap homography_adapt(const Image& img, const EdgePredictor& predictor, std::span<const Homography> homographies) {
  if (homographies.empty()) throw std::invalid_argument("homography_adapt: no homographies given");
  const std::size_t n = img.size();
  std::vector<double> num(n, 0.0), den(n, 0.0);
  for (const auto& h : homographies) {
    const auto warped = warp_image(img, h);
    const EdgeMap pred = predictor(warped.raster);
    require_same_geometry(pred, img, "homography_adapt: predictor output");
    const Homography inv = h.inverse();
    const auto back = warp_image(pred, inv);
    const auto mask = warp_image(warped.valid, inv);
    for (std::size_t i = 0; i < n; ++i) {
      if (back.valid.pixels()[i] == 0.0F) continue;
      const double m = mask.raster.pixels()[i];
      num[i] += m * back.raster.pixels()[i];
      den[i] += m;
    }
  }
  EdgeMap out(img.height(), img.width());
  for (std::size_t i = 0; i < n; ++i) {
    if (den[i] > 0.0) out.pixels()[i] = static_cast<float>(num[i] / den[i]);
  }
  return out;
}

EdgeMap homography_adapt(const Image& img, const EdgePredictor& predictor, const AnnotatorConfig& cfg) {
  const auto hs = sample_adaptation_set(cfg, img.height(), img.width());
  return homography_adapt(img, predictor, hs);
}

}  // namespace superedge
