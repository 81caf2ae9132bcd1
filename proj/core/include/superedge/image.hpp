#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "superedge/errors.hpp"

namespace superedge {

struct ImageTag {};
struct EdgeTag {};
struct FieldTag {};

// Row-major single-channel float raster. The tag distinguishes intensity
// images, edge-probability maps, and unconstrained real fields at the type
// level; `retag` converts between them explicitly.
template <class Tag>
class Raster {
 public:
  Raster() = default;
  Raster(int height, int width, float fill = 0.0F) : height_(height), width_(width) {
    if (height <= 0 || width <= 0) {
      throw ShapeError("raster extents must be positive, got " + std::to_string(height) + "x" + std::to_string(width));
    }
    pixels_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
  }
  Raster(int height, int width, std::vector<float> pixels) : height_(height), width_(width), pixels_(std::move(pixels)) {
    if (height <= 0 || width <= 0 ||
        pixels_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
      throw ShapeError("raster buffer of " + std::to_string(pixels_.size()) + " values does not match " +
                       std::to_string(height) + "x" + std::to_string(width));
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  float& operator()(int y, int x) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  float operator()(int y, int x) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  // Replicate (clamp-to-edge) boundary.
  float clamped(int y, int x) const {
    y = y < 0 ? 0 : (y >= height_ ? height_ - 1 : y);
    x = x < 0 ? 0 : (x >= width_ ? width_ - 1 : x);
    return (*this)(y, x);
  }
  bool contains(int y, int x) const { return y >= 0 && y < height_ && x >= 0 && x < width_; }

  std::span<float> pixels() { return pixels_; }
  std::span<const float> pixels() const { return pixels_; }

  template <class Other>
  bool same_geometry(const Raster<Other>& o) const {
    return height_ == o.height() && width_ == o.width();
  }

  bool operator==(const Raster& o) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> pixels_;
};

using Image = Raster<ImageTag>;
using EdgeMap = Raster<EdgeTag>;
using Field = Raster<FieldTag>;

template <class To, class From>
Raster<To> retag(const Raster<From>& r) {
  return Raster<To>(r.height(), r.width(), std::vector<float>(r.pixels().begin(), r.pixels().end()));
}

template <class A, class B>
void require_same_geometry(const Raster<A>& a, const Raster<B>& b, const char* what) {
  if (!a.same_geometry(b)) {
    throw ShapeError(std::string(what) + ": geometry mismatch " + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" + std::to_string(b.width()));
  }
}

struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<float> rgb;  // interleaved, row-major
};

Image to_grayscale(const RgbImage& rgb);

// Separable Gaussian, radius ceil(3 sigma), replicate padding.
Image gaussian_blur(const Image& img, float sigma);
std::vector<float> gaussian_kernel(float sigma);

// Pixels >= threshold become 1, all others 0.
EdgeMap binarize(const EdgeMap& map, float threshold);

// Square (2r+1)^2 dilation of the binarized (> 0.5) input.
EdgeMap dilate(const EdgeMap& binary, int radius);

// Zhang-Suen thinning of the binarized (> 0.5) input.
EdgeMap thin(const EdgeMap& binary);

// (v - min) / (max - min); a constant input maps to all zeros.
template <class Tag>
EdgeMap minmax_normalize(const Raster<Tag>& map);

// Number of 8-connected components of pixels > 0.5.
int count_components(const EdgeMap& binary);

std::size_t count_on(const EdgeMap& binary);

// Replicate-pads bottom/right so both extents are multiples of `multiple`.
Image pad_to_multiple(const Image& img, int multiple);
EdgeMap crop(const EdgeMap& map, int height, int width);

}  // namespace superedge
