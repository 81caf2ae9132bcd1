#include "superedge/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace superedge {

Image to_grayscale(const RgbImage& rgb) {
  const auto n = static_cast<std::size_t>(rgb.height) * static_cast<std::size_t>(rgb.width);
  if (rgb.height <= 0 || rgb.width <= 0 || rgb.rgb.size() != 3 * n) {
    throw ShapeError("to_grayscale: interleaved buffer does not match " + std::to_string(rgb.height) + "x" +
                     std::to_string(rgb.width));
  }
  Image out(rgb.height, rgb.width);
  auto px = out.pixels();
  for (std::size_t i = 0; i < n; ++i) {
    const double luma = 0.299 * rgb.rgb[3 * i] + 0.587 * rgb.rgb[3 * i + 1] + 0.114 * rgb.rgb[3 * i + 2];
    px[i] = static_cast<float>(std::clamp(luma, 0.0, 1.0));
  }
  return out;
}

std::vector<float> gaussian_kernel(float sigma) {
  if (!(sigma > 0.0F)) throw std::invalid_argument("gaussian sigma must be positive, got " + std::to_string(sigma));
  const int radius = static_cast<int>(std::ceil(3.0F * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (static_cast<double>(i) * i) / (static_cast<double>(sigma) * sigma));
    total += k[i + radius];
  }
  std::vector<float> out(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) out[i] = static_cast<float>(k[i] / total);
  return out;
}

Image gaussian_blur(const Image& img, float sigma) {
  const auto kernel = gaussian_kernel(sigma);
  const int radius = static_cast<int>(kernel.size() / 2);
  const int h = img.height(), w = img.width();
  Field tmp(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * img.clamped(y, x + i);
      tmp(y, x) = static_cast<float>(acc);
    }
  }
  Image out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp.clamped(y + i, x);
      out(y, x) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
    }
  }
  return out;
}

EdgeMap binarize(const EdgeMap& map, float threshold) {
  EdgeMap out(map.height(), map.width());
  auto src = map.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= threshold ? 1.0F : 0.0F;
  return out;
}

EdgeMap dilate(const EdgeMap& binary, int radius) {
  if (radius < 0) throw std::invalid_argument("dilate: radius must be >= 0");
  const int h = binary.height(), w = binary.width();
  // Separable max filter: rows, then columns.
  EdgeMap rows(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float v = 0.0F;
      for (int dx = -radius; dx <= radius && v == 0.0F; ++dx) {
        const int xx = x + dx;
        if (xx >= 0 && xx < w && binary(y, xx) > 0.5F) v = 1.0F;
      }
      rows(y, x) = v;
    }
  }
  EdgeMap out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float v = 0.0F;
      for (int dy = -radius; dy <= radius && v == 0.0F; ++dy) {
        const int yy = y + dy;
        if (yy >= 0 && yy < h && rows(yy, x) > 0.5F) v = 1.0F;
      }
      out(y, x) = v;
    }
  }
  return out;
}

namespace {

// 8-connected component labels of `on`; -1 for background.
std::vector<int> label_components(const std::vector<std::uint8_t>& on, int h, int w, int* count) {
  std::vector<int> label(on.size(), -1);
  std::vector<int> stack;
  int next = 0;
  for (int start = 0; start < h * w; ++start) {
    if (!on[start] || label[start] >= 0) continue;
    label[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int py = p / w, px = p % w;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int y = py + dy, x = px + dx;
          if (y < 0 || y >= h || x < 0 || x >= w) continue;
          const int q = y * w + x;
          if (on[q] && label[q] < 0) {
            label[q] = next;
            stack.push_back(q);
          }
        }
      }
    }
    ++next;
  }
  if (count) *count = next;
  return label;
}

}  // namespace

int count_components(const EdgeMap& binary) {
  std::vector<std::uint8_t> on(binary.size());
  for (std::size_t i = 0; i < on.size(); ++i) on[i] = binary.pixels()[i] > 0.5F;
  int count = 0;
  label_components(on, binary.height(), binary.width(), &count);
  return count;
}

std::size_t count_on(const EdgeMap& binary) {
  return static_cast<std::size_t>(std::count_if(binary.pixels().begin(), binary.pixels().end(),
                                                [](float v) { return v > 0.5F; }));
}

EdgeMap thin(const EdgeMap& binary) {
  const int h = binary.height(), w = binary.width();
  std::vector<std::uint8_t> on(binary.size());
  for (std::size_t i = 0; i < on.size(); ++i) on[i] = binary.pixels()[i] > 0.5F;
  auto at = [&](int y, int x) -> int { return (y >= 0 && y < h && x >= 0 && x < w) ? on[y * w + x] : 0; };

  std::vector<int> marked;
  std::vector<std::uint8_t> is_marked(on.size(), 0);
  // Per-pass component status of marked pixels: 1 = component keeps an
  // unmarked pixel, 2 = every pixel is marked (keeper[] names the survivor).
  std::vector<std::uint8_t> state(on.size(), 0);
  std::vector<int> keeper(on.size(), -1);
  std::vector<int> touched, stack, visited;
  auto resolve = [&](int start) {
    visited.clear();
    stack.assign(1, start);
    state[start] = 3;
    visited.push_back(start);
    bool survivor = false;
    while (!stack.empty() && !survivor) {
      const int p = stack.back();
      stack.pop_back();
      const int py = p / w, px = p % w;
      for (int dy = -1; dy <= 1 && !survivor; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int y = py + dy, x = px + dx;
          if (y < 0 || y >= h || x < 0 || x >= w) continue;
          const int q = y * w + x;
          if (!on[q]) continue;
          if (!is_marked[q] || state[q] == 1) {
            survivor = true;
            break;
          }
          if (state[q] != 0) continue;
          state[q] = 3;
          visited.push_back(q);
          stack.push_back(q);
        }
      }
    }
    for (int q : visited) {
      state[q] = survivor ? 1 : 2;
      keeper[q] = start;
      touched.push_back(q);
    }
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      marked.clear();
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!on[y * w + x]) continue;
          // P2..P9 clockwise from north.
          const int p[8] = {at(y - 1, x), at(y - 1, x + 1), at(y, x + 1), at(y + 1, x + 1),
                            at(y + 1, x), at(y + 1, x - 1), at(y, x - 1), at(y - 1, x - 1)};
          int b = 0, a = 0;
          for (int i = 0; i < 8; ++i) {
            b += p[i];
            a += (p[i] == 0 && p[(i + 1) % 8] == 1);
          }
          if (b < 2 || b > 6 || a != 1) continue;
          const bool ok = pass == 0 ? (p[0] * p[2] * p[4] == 0 && p[2] * p[4] * p[6] == 0)
                                    : (p[0] * p[2] * p[6] == 0 && p[0] * p[4] * p[6] == 0);
          if (ok) marked.push_back(y * w + x);
        }
      }
      if (marked.empty()) continue;
      // Parallel deletion can erase small blobs (e.g. a 2x2 block) entirely;
      // keep the first pixel of any component that would otherwise vanish.
      for (int idx : marked) is_marked[idx] = 1;
      std::vector<int> removals;
      removals.reserve(marked.size());
      for (int idx : marked) {
        if (state[idx] == 0) resolve(idx);
        if (state[idx] == 1 || (state[idx] == 2 && keeper[idx] != idx)) removals.push_back(idx);
      }
      for (int idx : touched) state[idx] = 0;
      touched.clear();
      for (int idx : marked) is_marked[idx] = 0;
      for (int idx : removals) on[idx] = 0;
      changed = changed || !removals.empty();
    }
  }
  EdgeMap out(h, w);
  for (std::size_t i = 0; i < on.size(); ++i) out.pixels()[i] = on[i] ? 1.0F : 0.0F;
  return out;
}

template <class Tag>
EdgeMap minmax_normalize(const Raster<Tag>& map) {
  EdgeMap out(map.height(), map.width());
  auto src = map.pixels();
  if (src.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(src.begin(), src.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) return out;
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = static_cast<float>(std::clamp((src[i] - lo) / (hi - lo), 0.0, 1.0));
  }
  return out;
}

template EdgeMap minmax_normalize(const Raster<ImageTag>&);
template EdgeMap minmax_normalize(const Raster<EdgeTag>&);
template EdgeMap minmax_normalize(const Raster<FieldTag>&);

Image pad_to_multiple(const Image& img, int multiple) {
  const int h = (img.height() + multiple - 1) / multiple * multiple;
  const int w = (img.width() + multiple - 1) / multiple * multiple;
  if (h == img.height() && w == img.width()) return img;
  Image out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out(y, x) = img.clamped(y, x);
  }
  return out;
}

EdgeMap crop(const EdgeMap& map, int height, int width) {
  if (height > map.height() || width > map.width()) throw ShapeError("crop: target larger than source");
  if (height == map.height() && width == map.width()) return map;
  EdgeMap out(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) out(y, x) = map(y, x);
  }
  return out;
}

}  // namespace superedge
