#include "superedge/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

#include "superedge/image_io.hpp"

namespace superedge {

std::string_view to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kSegment: return "segment";
    case ShapeKind::kPolygon: return "polygon";
    case ShapeKind::kStar: return "star";
    case ShapeKind::kEllipse: return "ellipse";
    case ShapeKind::kCube: return "cube";
    case ShapeKind::kCheckerboard: return "checkerboard";
  }
  return "unknown";
}

std::vector<Point> bresenham(Point a, Point b) {
  if (b.y < a.y || (b.y == a.y && b.x < a.x)) std::swap(a, b);
  std::vector<Point> out;
  const int dx = std::abs(b.x - a.x), sx = a.x < b.x ? 1 : -1;
  const int dy = -std::abs(b.y - a.y), sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  Point p = a;
  while (true) {
    out.push_back(p);
    if (p == b) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      p.x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      p.y += sy;
    }
  }
  return out;
}

std::vector<Point> midpoint_ellipse(Point c, int rx, int ry) {
  std::vector<Point> out;
  auto plot4 = [&](int x, int y) {
    out.push_back({c.x + x, c.y + y});
    out.push_back({c.x - x, c.y + y});
    out.push_back({c.x + x, c.y - y});
    out.push_back({c.x - x, c.y - y});
  };
  if (rx <= 0 || ry <= 0) {
    for (const auto& p : bresenham({c.x - rx, c.y - ry}, {c.x + rx, c.y + ry})) out.push_back(p);
    return out;
  }
  const double rx2 = static_cast<double>(rx) * rx, ry2 = static_cast<double>(ry) * ry;
  int x = 0, y = ry;
  double d1 = ry2 - rx2 * ry + 0.25 * rx2;
  double dx = 2 * ry2 * x, dy = 2 * rx2 * y;
  while (dx < dy) {
    plot4(x, y);
    if (d1 < 0) {
      ++x;
      dx += 2 * ry2;
      d1 += dx + ry2;
    } else {
      ++x;
      --y;
      dx += 2 * ry2;
      dy -= 2 * rx2;
      d1 += dx - dy + ry2;
    }
  }
  double d2 = ry2 * (x + 0.5) * (x + 0.5) + rx2 * (y - 1.0) * (y - 1.0) - rx2 * ry2;
  while (y >= 0) {
    plot4(x, y);
    if (d2 > 0) {
      --y;
      dy -= 2 * rx2;
      d2 += rx2 - dy;
    } else {
      --y;
      ++x;
      dx += 2 * ry2;
      dy -= 2 * rx2;
      d2 += dx - dy + rx2;
    }
  }
  return out;
}

namespace {

constexpr std::array<std::array<int, 2>, 12> kCubeEdges{{{0, 1}, {1, 3}, {3, 2}, {2, 0}, {4, 5}, {5, 7},
                                                         {7, 6}, {6, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}}};

std::vector<std::array<Point, 2>> outline_segments(const ShapeSpec& s) {
  std::vector<std::array<Point, 2>> segs;
  const auto& v = s.vertices;
  switch (s.kind) {
    case ShapeKind::kSegment:
      segs.push_back({v.at(0), v.at(1)});
      break;
    case ShapeKind::kPolygon:
    case ShapeKind::kStar:
      for (std::size_t i = 0; i < v.size(); ++i) segs.push_back({v[i], v[(i + 1) % v.size()]});
      break;
    case ShapeKind::kCube:
      for (const auto& e : kCubeEdges) segs.push_back({v.at(e[0]), v.at(e[1])});
      break;
    case ShapeKind::kCheckerboard: {
      const int stride = s.cols + 1;
      for (int r = 0; r <= s.rows; ++r) {
        for (int c = 0; c <= s.cols; ++c) {
          if (c < s.cols) segs.push_back({v.at(r * stride + c), v.at(r * stride + c + 1)});
          if (r < s.rows) segs.push_back({v.at(r * stride + c), v.at((r + 1) * stride + c)});
        }
      }
      break;
    }
    case ShapeKind::kEllipse:
      break;
  }
  return segs;
}

bool inside_polygon(const std::vector<Point>& poly, double x, double y) {
  bool in = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const double xi = poly[i].x, yi = poly[i].y, xj = poly[j].x, yj = poly[j].y;
    if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) in = !in;
  }
  return in;
}

// Accumulates fill * coverage and coverage of a region over pixels in
// [x0, x1] × [y0, y1], 4×4 samples per pixel.
template <class Inside>
void accumulate_coverage(int height, int width, int x0, int y0, int x1, int y1, float fill, Inside inside,
                         std::vector<float>& value, std::vector<float>& cover) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, width - 1);
  y1 = std::min(y1, height - 1);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      int hits = 0;
      for (int j = 0; j < 4; ++j) {
        for (int i = 0; i < 4; ++i) {
          if (inside(x - 0.5 + (i + 0.5) / 4.0, y - 0.5 + (j + 0.5) / 4.0)) ++hits;
        }
      }
      if (hits == 0) continue;
      const float c = static_cast<float>(hits) / 16.0F;
      const std::size_t k = static_cast<std::size_t>(y) * width + x;
      value[k] += fill * c;
      cover[k] += c;
    }
  }
}

struct Box {
  int x0, y0, x1, y1;
};

Box bounds(const std::vector<Point>& pts) {
  Box b{pts.at(0).x, pts.at(0).y, pts.at(0).x, pts.at(0).y};
  for (const auto& p : pts) {
    b.x0 = std::min(b.x0, p.x);
    b.y0 = std::min(b.y0, p.y);
    b.x1 = std::max(b.x1, p.x);
    b.y1 = std::max(b.y1, p.y);
  }
  return b;
}

Box shape_bounds(const ShapeSpec& s) {
  if (s.kind == ShapeKind::kEllipse) {
    const Point c = s.vertices.at(0);
    return {c.x - s.rx, c.y - s.ry, c.x + s.rx, c.y + s.ry};
  }
  return bounds(s.vertices);
}

void draw_shape(const ShapeSpec& s, int height, int width, std::vector<float>& img) {
  const std::size_t n = img.size();
  std::vector<float> value(n, 0.0F), cover(n, 0.0F);
  const Box b = shape_bounds(s);
  switch (s.kind) {
    case ShapeKind::kPolygon:
    case ShapeKind::kStar:
      accumulate_coverage(height, width, b.x0, b.y0, b.x1, b.y1, s.fills.at(0),
                          [&](double x, double y) { return inside_polygon(s.vertices, x, y); }, value, cover);
      break;
    case ShapeKind::kEllipse: {
      const double cx = s.vertices.at(0).x, cy = s.vertices.at(0).y, rx = s.rx, ry = s.ry;
      accumulate_coverage(height, width, b.x0, b.y0, b.x1, b.y1, s.fills.at(0),
                          [&](double x, double y) {
                            const double u = (x - cx) / rx, v = (y - cy) / ry;
                            return u * u + v * v <= 1.0;
                          },
                          value, cover);
      break;
    }
    case ShapeKind::kCheckerboard: {
      const int stride = s.cols + 1;
      for (int r = 0; r < s.rows; ++r) {
        for (int c = 0; c < s.cols; ++c) {
          const std::vector<Point> cell{s.vertices.at(r * stride + c), s.vertices.at(r * stride + c + 1),
                                        s.vertices.at((r + 1) * stride + c + 1), s.vertices.at((r + 1) * stride + c)};
          const Box cb = bounds(cell);
          accumulate_coverage(height, width, cb.x0, cb.y0, cb.x1, cb.y1, s.fills.at(r * s.cols + c),
                              [&](double x, double y) { return inside_polygon(cell, x, y); }, value, cover);
        }
      }
      break;
    }
    case ShapeKind::kSegment:
    case ShapeKind::kCube:
      for (const auto& seg : outline_segments(s)) {
        for (const auto& p : bresenham(seg[0], seg[1])) {
          if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height) continue;
          const std::size_t k = static_cast<std::size_t>(p.y) * width + p.x;
          value[k] = s.fills.at(0);
          cover[k] = 1.0F;
        }
      }
      break;
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (cover[k] == 0.0F) continue;
    const float c = std::min(cover[k], 1.0F);
    img[k] = img[k] * (1.0F - c) + value[k] / std::max(cover[k], 1.0F);
  }
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// Intensity at least 0.25 away from the background mean.
float contrasting_fill(Rng& rng) {
  return static_cast<float>(std::bernoulli_distribution(0.5)(rng) ? uniform(rng, 0.0, 0.25) : uniform(rng, 0.75, 1.0));
}

Point round_point(double x, double y) {
  return {static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y))};
}

// Radial outline around (cx, cy): n vertices at jittered, evenly spread angles.
std::vector<Point> radial_outline(Rng& rng, double cx, double cy, int n, double r_outer, double r_inner) {
  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double step = 2.0 * std::numbers::pi / n;
  std::vector<Point> pts;
  for (int i = 0; i < n; ++i) {
    const double jitter = r_inner > 0.0 ? 0.0 : uniform(rng, -0.25, 0.25) * step;
    const double a = phase + i * step + jitter;
    const double r = r_inner > 0.0 && i % 2 == 1 ? r_inner : r_outer;
    pts.push_back(round_point(cx + r * std::cos(a), cy + r * std::sin(a)));
  }
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

ShapeSpec random_shape(Rng& rng, ShapeKind kind, int cx, int cy, int size) {
  ShapeSpec s;
  s.kind = kind;
  const double r = size / 2.0;
  switch (kind) {
    case ShapeKind::kSegment: {
      const double a = uniform(rng, 0.0, std::numbers::pi);
      s.vertices = {round_point(cx - r * std::cos(a), cy - r * std::sin(a)),
                    round_point(cx + r * std::cos(a), cy + r * std::sin(a))};
      s.fills = {contrasting_fill(rng)};
      break;
    }
    case ShapeKind::kPolygon:
      s.vertices = radial_outline(rng, cx, cy, uniform_int(rng, 3, 8), r, 0.0);
      s.fills = {contrasting_fill(rng)};
      break;
    case ShapeKind::kStar: {
      const int points = uniform_int(rng, 5, 8);
      s.vertices = radial_outline(rng, cx, cy, 2 * points, r, r * uniform(rng, 0.5, 0.7));
      s.fills = {contrasting_fill(rng)};
      break;
    }
    case ShapeKind::kEllipse:
      s.vertices = {{cx, cy}};
      s.rx = std::max(3, static_cast<int>(std::lround(r * uniform(rng, 0.5, 1.0))));
      s.ry = std::max(3, static_cast<int>(std::lround(r * uniform(rng, 0.5, 1.0))));
      s.fills = {contrasting_fill(rng)};
      break;
    case ShapeKind::kCube: {
      // Orthographic view of a rotated cube; half-diagonal r / sqrt(3) keeps it inside the box.
      const double half = r / std::sqrt(3.0);
      const double ay = uniform(rng, 0.2, 1.3), ax = uniform(rng, 0.2, 1.3), az = uniform(rng, 0.0, std::numbers::pi);
      for (int i = 0; i < 8; ++i) {
        double x = (i & 1) ? half : -half, y = (i & 2) ? half : -half, z = (i & 4) ? half : -half;
        double t = std::cos(ay) * x + std::sin(ay) * z;
        z = -std::sin(ay) * x + std::cos(ay) * z;
        x = t;
        t = std::cos(ax) * y - std::sin(ax) * z;
        y = t;
        t = std::cos(az) * x - std::sin(az) * y;
        y = std::sin(az) * x + std::cos(az) * y;
        x = t;
        s.vertices.push_back(round_point(cx + x, cy + y));
      }
      s.fills = {contrasting_fill(rng)};
      break;
    }
    case ShapeKind::kCheckerboard: {
      s.rows = uniform_int(rng, 2, 4);
      s.cols = uniform_int(rng, 2, 4);
      const double cell = std::max(4.0, size / std::sqrt(2.0) / std::max(s.rows, s.cols));
      const double a = uniform(rng, -0.5, 0.5);
      const double ux = std::cos(a), uy = std::sin(a);
      const double ox = cx - cell * (s.cols * ux - s.rows * uy) / 2.0;
      const double oy = cy - cell * (s.cols * uy + s.rows * ux) / 2.0;
      for (int i = 0; i <= s.rows; ++i) {
        for (int j = 0; j <= s.cols; ++j) {
          s.vertices.push_back(round_point(ox + cell * (j * ux - i * uy), oy + cell * (j * uy + i * ux)));
        }
      }
      const float dark = static_cast<float>(uniform(rng, 0.0, 0.25));
      const float bright = static_cast<float>(uniform(rng, 0.75, 1.0));
      for (int i = 0; i < s.rows; ++i) {
        for (int j = 0; j < s.cols; ++j) s.fills.push_back((i + j) % 2 == 0 ? dark : bright);
      }
      break;
    }
  }
  return s;
}

bool degenerate(const ShapeSpec& s) {
  if (s.kind == ShapeKind::kPolygon || s.kind == ShapeKind::kStar) {
    if (s.vertices.size() < 3) return true;
    double area = 0.0;
    for (std::size_t i = 0, j = s.vertices.size() - 1; i < s.vertices.size(); j = i++) {
      area += static_cast<double>(s.vertices[j].x) * s.vertices[i].y - static_cast<double>(s.vertices[i].x) * s.vertices[j].y;
    }
    return std::abs(area) / 2.0 < 20.0;
  }
  return false;
}

}  // namespace

EdgeMap rasterize_outline(const ShapeSpec& shape, int height, int width) {
  EdgeMap out(height, width);
  auto plot = [&](Point p) {
    if (out.contains(p.y, p.x)) out(p.y, p.x) = 1.0F;
  };
  if (shape.kind == ShapeKind::kEllipse) {
    for (const auto& p : midpoint_ellipse(shape.vertices.at(0), shape.rx, shape.ry)) plot(p);
  } else {
    for (const auto& seg : outline_segments(shape)) {
      for (const auto& p : bresenham(seg[0], seg[1])) plot(p);
    }
  }
  return out;
}

Image render_shapes(int height, int width, const std::vector<ShapeSpec>& shapes, float background) {
  Image img(height, width, background);
  std::vector<float> px(img.pixels().begin(), img.pixels().end());
  for (const auto& s : shapes) draw_shape(s, height, width, px);
  return Image(height, width, std::move(px));
}

SyntheticSample render_sample(int height, int width, std::vector<ShapeSpec> shapes, Rng& rng,
                              const SyntheticOptions& options) {
  SyntheticSample out;
  Image bg(height, width, static_cast<float>(options.background_mean));
  if (options.noise) {
    std::normal_distribution<double> noise(options.background_mean, options.background_sigma);
    for (auto& v : bg.pixels()) v = static_cast<float>(noise(rng));
    if (std::bernoulli_distribution(options.background_blur_probability)(rng)) {
      bg = gaussian_blur(bg, static_cast<float>(uniform(rng, 1.0, 3.0)));
    }
    for (auto& v : bg.pixels()) v = std::clamp(v, 0.0F, 1.0F);
  }
  std::vector<float> px(bg.pixels().begin(), bg.pixels().end());
  for (const auto& s : shapes) draw_shape(s, height, width, px);
  out.image = Image(height, width, std::move(px));

  if (options.noise) {
    const double sigma = uniform(rng, 0.0, 1.0);
    if (sigma > 0.05) out.image = gaussian_blur(out.image, static_cast<float>(sigma));
    std::normal_distribution<double> noise(0.0, uniform(rng, 0.0, 0.05));
    for (auto& v : out.image.pixels()) v = std::clamp(static_cast<float>(v + noise(rng)), 0.0F, 1.0F);
  }

  out.gt_edges = EdgeMap(height, width);
  for (const auto& s : shapes) {
    const EdgeMap o = rasterize_outline(s, height, width);
    for (std::size_t k = 0; k < o.size(); ++k) {
      if (o.pixels()[k] > 0.0F) out.gt_edges.pixels()[k] = 1.0F;
    }
  }
  out.shapes = std::move(shapes);
  return out;
}

SyntheticSample generate_sample(int height, int width, Rng& rng, const SyntheticOptions& options) {
  if (height < 32 || width < 32) throw ShapeError("generate_sample: height and width must be >= 32");
  if (options.min_shapes < 0 || options.min_shapes > options.max_shapes) {
    throw std::invalid_argument("generate_sample: invalid shape count range");
  }
  static constexpr ShapeKind kKinds[] = {ShapeKind::kSegment, ShapeKind::kPolygon, ShapeKind::kStar,
                                         ShapeKind::kEllipse, ShapeKind::kCube,    ShapeKind::kCheckerboard};
  const int wanted = options.shape_count ? *options.shape_count : uniform_int(rng, options.min_shapes, options.max_shapes);
  const int margin = 2;
  const int max_size = std::max(12, std::min(height, width) / 2);
  std::vector<ShapeSpec> shapes;
  std::vector<Box> taken;
  for (int attempt = 0; attempt < 40 * std::max(wanted, 1) && static_cast<int>(shapes.size()) < wanted; ++attempt) {
    const ShapeKind kind = kKinds[uniform_int(rng, 0, 5)];
    const int min_size = kind == ShapeKind::kCube ? 20 : 10;
    const int size = uniform_int(rng, min_size, std::max(min_size, max_size));
    const int half = size / 2 + 1;
    if (2 * (half + margin) >= std::min(height, width)) continue;
    const int cx = uniform_int(rng, half + margin, width - 1 - half - margin);
    const int cy = uniform_int(rng, half + margin, height - 1 - half - margin);
    ShapeSpec s = random_shape(rng, kind, cx, cy, size);
    if (degenerate(s)) continue;
    Box b = shape_bounds(s);
    if (b.x0 < margin || b.y0 < margin || b.x1 > width - 1 - margin || b.y1 > height - 1 - margin) continue;
    const bool overlaps = std::any_of(taken.begin(), taken.end(), [&](const Box& o) {
      return b.x0 <= o.x1 + 2 * margin && o.x0 <= b.x1 + 2 * margin && b.y0 <= o.y1 + 2 * margin &&
             o.y0 <= b.y1 + 2 * margin;
    });
    if (overlaps) continue;
    taken.push_back(b);
    shapes.push_back(std::move(s));
  }
  return render_sample(height, width, std::move(shapes), rng, options);
}

void generate_dataset(int count, int height, int width, std::uint64_t seed, const std::filesystem::path& out_dir,
                      const SyntheticOptions& options) {
  if (count < 1) throw std::invalid_argument("generate_dataset: count must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  std::filesystem::create_directories(out_dir / "edges", ec);
  if (ec) throw IoError("cannot create dataset directory " + out_dir.string() + ": " + ec.message());
  std::string manifest;
  for (int i = 0; i < count; ++i) {
    Rng rng = make_rng(seed, {streams::kSynthetic, static_cast<std::uint64_t>(i)});
    const SyntheticSample s = generate_sample(height, width, rng, options);
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.png", i);
    const std::string image_rel = std::string("images/") + name;
    const std::string edge_rel = std::string("edges/") + name;
    write_image(out_dir / image_rel, s.image);
    write_image(out_dir / edge_rel, s.gt_edges);
    manifest += std::to_string(i) + "\t" + image_rel + "\t" + edge_rel + "\n";
  }
  std::ofstream m(out_dir / "manifest.txt", std::ios::binary | std::ios::trunc);
  if (!m) throw IoError("cannot write " + (out_dir / "manifest.txt").string());
  m << manifest;
  if (!m) throw IoError("failed writing " + (out_dir / "manifest.txt").string());
}

}  // namespace superedge
