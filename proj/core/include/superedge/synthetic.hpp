#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "superedge/image.hpp"
#include "superedge/random.hpp"

namespace superedge {

enum class ShapeKind { kSegment, kPolygon, kStar, kEllipse, kCube, kCheckerboard };

std::string_view to_string(ShapeKind kind);

struct Point {
  int x = 0;
  int y = 0;
  bool operator==(const Point&) const = default;
};

// Geometry is stored on the integer pixel lattice so the rendered boundary
// and the rasterized ground truth agree exactly.
//   kSegment:      2 endpoints
//   kPolygon/kStar: closed outline, filled with even-odd coverage
//   kEllipse:      vertices = {center}, radii rx/ry
//   kCube:         8 projected corners, outline = the 12 cube edges
//   kCheckerboard: (rows+1)*(cols+1) lattice corners, row-major
struct ShapeSpec {
  ShapeKind kind = ShapeKind::kPolygon;
  std::vector<Point> vertices;
  int rx = 0;
  int ry = 0;
  int rows = 0;
  int cols = 0;
  // One intensity per shape, or one per cell for checkerboards.
  std::vector<float> fills;
};

struct SyntheticOptions {
  int min_shapes = 1;
  int max_shapes = 8;
  double background_mean = 0.5;
  double background_sigma = 0.12;
  double background_blur_probability = 0.75;
  bool noise = true;    // background noise and post-draw augmentation
  std::optional<int> shape_count;  // overrides the random count
};

struct SyntheticSample {
  Image image;
  EdgeMap gt_edges;
  std::vector<ShapeSpec> shapes;
};

// Boundary pixels of one shape (union of its 1-pixel outlines).
EdgeMap rasterize_outline(const ShapeSpec& shape, int height, int width);

// Bresenham line, endpoints in canonical order so (a, b) and (b, a) agree.
std::vector<Point> bresenham(Point a, Point b);

// Midpoint ellipse outline.
std::vector<Point> midpoint_ellipse(Point center, int rx, int ry);

// Composites the given shapes onto a flat background with 4×4 supersampled
// coverage; no noise.
Image render_shapes(int height, int width, const std::vector<ShapeSpec>& shapes, float background);

// Draws background and shapes; when options.noise is false the image is the
// clean render over a flat background.
SyntheticSample render_sample(int height, int width, std::vector<ShapeSpec> shapes, Rng& rng,
                              const SyntheticOptions& options = {});

SyntheticSample generate_sample(int height, int width, Rng& rng, const SyntheticOptions& options = {});

// Writes images/NNNNNN.png, edges/NNNNNN.png and manifest.txt. Sample i uses
// the generator stream (seed, i), so any subset regenerates identically.
void generate_dataset(int count, int height, int width, std::uint64_t seed, const std::filesystem::path& out_dir,
                      const SyntheticOptions& options = {});

}  // namespace superedge
