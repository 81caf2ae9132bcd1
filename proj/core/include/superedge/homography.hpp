#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "superedge/image.hpp"
#include "superedge/random.hpp"

namespace superedge {

// 3×3 projective transform on homogeneous coordinates, row-major, scaled so
// that m[8] == 1.
class Homography {
 public:
  Homography() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}
  explicit Homography(const std::array<double, 9>& m);

  static Homography identity() { return Homography(); }
  static Homography translation(double tx, double ty);
  static Homography scaling(double sx, double sy);

  double operator()(int r, int c) const { return m_[r * 3 + c]; }
  const std::array<double, 9>& matrix() const { return m_; }

  double determinant() const;
  Homography inverse() const;
  Homography operator*(const Homography& rhs) const;
  std::pair<double, double> apply(double x, double y) const;

  bool operator==(const Homography&) const = default;

 private:
  std::array<double, 9> m_;
};

// Maps the four corners of the unit square onto `corners` (in the order
// (0,0), (1,0), (1,1), (0,1)).
Homography homography_from_corners(const std::array<std::pair<double, double>, 4>& corners);

struct AnnotatorConfig {
  int n_homographies = 100;
  double rotation_max_deg = 25.0;
  double scale_min = 0.8;
  double scale_max = 1.2;
  double perspective_amp = 0.1;
  double translation_frac = 0.1;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// Random transform in normalized [0,1]^2 coordinates: center-anchored
// rotation and scale, translation, then 4-corner perspective jitter. Draws
// whose warped unit-square corners leave [-0.3, 1.3]^2 are rejected and
// redrawn, up to 100 times.
Homography sample_homography(const AnnotatorConfig& cfg, Rng& rng);

// Conjugates a normalized-coordinate homography into pixel coordinates,
// with (0,0) and (1,1) mapping to the first and last pixel centers.
Homography to_pixel_frame(const Homography& normalized, int height, int width);

template <class Tag>
struct Warped {
  Raster<Tag> raster;
  EdgeMap valid;  // 1 where the source coordinate falls inside the input
};

// Inverse-mapped bilinear resampling: out(p) = src(h^-1 p). Pixels whose
// source lies outside the input are 0 and marked invalid.
template <class Tag>
Warped<Tag> warp_image(const Raster<Tag>& src, const Homography& h);

using EdgePredictor = std::function<EdgeMap(const Image&)>;

// Identity first, then n_homographies - 1 sampled transforms, in pixel
// coordinates for an image of the given size.
std::vector<Homography> sample_adaptation_set(const AnnotatorConfig& cfg, int height, int width);

// Mask-weighted average of h_i^-1 f(h_i(I)) over the given pixel-frame
// transforms; 0 where no transform covers a pixel.
EdgeMap homography_adapt(const Image& img, const EdgePredictor& predictor, std::span<const Homography> homographies);
EdgeMap homography_adapt(const Image& img, const EdgePredictor& predictor, const AnnotatorConfig& cfg);

}  // namespace superedge
