#include "superedge/classical.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace superedge {

SobelGradients sobel(const Image& img) {
  const int h = img.height(), w = img.width();
  SobelGradients g{Field(h, w), Field(h, w), Field(h, w)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float tl = img.clamped(y - 1, x - 1), tc = img.clamped(y - 1, x), tr = img.clamped(y - 1, x + 1);
      const float ml = img.clamped(y, x - 1), mr = img.clamped(y, x + 1);
      const float bl = img.clamped(y + 1, x - 1), bc = img.clamped(y + 1, x), br = img.clamped(y + 1, x + 1);
      const float gx = (tr + 2.0F * mr + br) - (tl + 2.0F * ml + bl);
      const float gy = (bl + 2.0F * bc + br) - (tl + 2.0F * tc + tr);
      g.gx(y, x) = gx;
      g.gy(y, x) = gy;
      g.magnitude(y, x) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return g;
}

EdgeMap canny(const Image& img, float low, float high, float sigma) {
  if (low < 0.0F || high > 1.0F || low > high) {
    throw std::invalid_argument("canny: thresholds must satisfy 0 <= low <= high <= 1");
  }
  const int h = img.height(), w = img.width();
  const auto g = sobel(gaussian_blur(img, sigma));
  const auto mag = g.magnitude.pixels();
  const float peak = *std::max_element(mag.begin(), mag.end());
  EdgeMap out(h, w);
  if (!(peak > 0.0F)) return out;

  auto m = [&](int y, int x) { return g.magnitude.clamped(y, x) / peak; };
  // 0: edge (0 | 1, 0), 1: (1, 1), 2: (0, 1), 3: (-1, 1)
  static constexpr int kDx[4] = {1, 1, 0, -1};
  static constexpr int kDy[4] = {0, 1, 1, 1};
  std::vector<std::uint8_t> cls(static_cast<std::size_t>(h) * w, 0);  // 0 none, 1 weak, 2 strong
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float v = m(y, x);
      if (!(v > 0.0F) || v < low) continue;
      double angle = std::atan2(static_cast<double>(g.gy(y, x)), static_cast<double>(g.gx(y, x))) * 180.0 /
                     std::numbers::pi;
      if (angle < 0.0) angle += 180.0;
      const int dir = angle < 22.5 || angle >= 157.5 ? 0 : angle < 67.5 ? 1 : angle < 112.5 ? 2 : 3;
      const float before = m(y - kDy[dir], x - kDx[dir]);
      const float after = m(y + kDy[dir], x + kDx[dir]);
      // Strict on one side so a two-pixel plateau keeps exactly one pixel.
      if (v > before && v >= after) cls[static_cast<std::size_t>(y) * w + x] = v >= high ? 2 : 1;
    }
  }

  std::vector<int> stack;
  for (int i = 0; i < h * w; ++i) {
    if (cls[i] == 2) {
      out.pixels()[i] = 1.0F;
      stack.push_back(i);
    }
  }
  while (!stack.empty()) {
    const int p = stack.back();
    stack.pop_back();
    const int py = p / w, px = p % w;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int y = py + dy, x = px + dx;
        if (y < 0 || y >= h || x < 0 || x >= w) continue;
        const int q = y * w + x;
        if (cls[q] == 1 && out.pixels()[q] == 0.0F) {
          out.pixels()[q] = 1.0F;
          stack.push_back(q);
        }
      }
    }
  }
  return out;
}

// ---- L0 smoothing ----------------------------------------------------------------

namespace {

// Forward differences with a zero last column/row (replicate boundary).
void forward_diff(const std::vector<double>& s, int h, int w, std::vector<double>& dx, std::vector<double>& dy) {
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      dx[i] = x + 1 < w ? s[i + 1] - s[i] : 0.0;
      dy[i] = y + 1 < h ? s[i + w] - s[i] : 0.0;
    }
  }
}

// out = D_x^T hx + D_y^T hy
void diff_adjoint(const std::vector<double>& hx, const std::vector<double>& hy, int h, int w, std::vector<double>& out) {
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      double v = 0.0;
      if (x > 0) v += hx[i - 1];
      if (x + 1 < w) v -= hx[i];
      if (y > 0) v += hy[i - w];
      if (y + 1 < h) v -= hy[i];
      out[i] = v;
    }
  }
}

// out = (1 + beta L) s with L the Neumann 5-point Laplacian.
void apply_system(const std::vector<double>& s, double beta, int h, int w, std::vector<double>& out) {
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      double lap = 0.0;
      if (x > 0) lap += s[i] - s[i - 1];
      if (x + 1 < w) lap += s[i] - s[i + 1];
      if (y > 0) lap += s[i] - s[i - w];
      if (y + 1 < h) lap += s[i] - s[i + w];
      out[i] = s[i] + beta * lap;
    }
  }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// Jacobi-preconditioned CG, warm-started from x. Returns iterations used.
int solve_screened_poisson(const std::vector<double>& rhs, double beta, int h, int w, double tol, int max_iter,
                           std::vector<double>& x) {
  const std::size_t n = rhs.size();
  std::vector<double> r(n), z(n), p(n), ap(n), diag(n);
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const int deg = (xx > 0) + (xx + 1 < w) + (y > 0) + (y + 1 < h);
      diag[y * w + xx] = 1.0 + beta * deg;
    }
  }
  apply_system(x, beta, h, w, ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - ap[i];
  const double bnorm = std::sqrt(dot(rhs, rhs));
  const double target = tol * (bnorm > 0.0 ? bnorm : 1.0);
  if (std::sqrt(dot(r, r)) <= target) return 0;
  for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
  p = z;
  double rz = dot(r, z);
  for (int it = 1; it <= max_iter; ++it) {
    apply_system(p, beta, h, w, ap);
    const double alpha = rz / dot(p, ap);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    if (std::sqrt(dot(r, r)) <= target) return it;
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    const double rz_next = dot(r, z);
    const double ratio = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + ratio * p[i];
  }
  throw NumericalError("l0_smooth: conjugate gradients did not converge within " + std::to_string(max_iter) +
                       " iterations (beta = " + std::to_string(beta) + ")");
}

}  // namespace

std::size_t count_nonzero_gradients(const Image& img, float zero_gradient) {
  const int h = img.height(), w = img.width();
  std::size_t count = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float dx = x + 1 < w ? img(y, x + 1) - img(y, x) : 0.0F;
      const float dy = y + 1 < h ? img(y + 1, x) - img(y, x) : 0.0F;
      if (std::abs(dx) > zero_gradient || std::abs(dy) > zero_gradient) ++count;
    }
  }
  return count;
}

double l0_energy(const Image& smoothed, const Image& input, float lambda, float zero_gradient) {
  require_same_geometry(smoothed, input, "l0_energy");
  double data = 0.0;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double d = static_cast<double>(smoothed.pixels()[i]) - input.pixels()[i];
    data += d * d;
  }
  return data + static_cast<double>(lambda) * static_cast<double>(count_nonzero_gradients(smoothed, zero_gradient));
}

L0Result l0_smooth_traced(const Image& img, const L0Options& options) {
  if (!(options.lambda > 0.0F)) throw std::invalid_argument("l0_smooth: lambda must be positive");
  if (!(options.kappa > 1.0F)) throw std::invalid_argument("l0_smooth: kappa must exceed 1");
  const int h = img.height(), w = img.width();
  const std::size_t n = img.size();
  const double lambda = options.lambda;

  std::vector<double> input(img.pixels().begin(), img.pixels().end());
  std::vector<double> s = input, dx(n), dy(n), adj(n), rhs(n);

  L0Result result;
  result.image = img;
  double best = l0_energy(img, img, options.lambda, options.zero_gradient);
  result.energy.push_back(best);

  Image candidate(h, w);
  for (double beta = 2.0 * lambda; beta < options.beta_max; beta *= options.kappa) {
    forward_diff(s, h, w, dx, dy);
    const double keep = lambda / beta;
    for (std::size_t i = 0; i < n; ++i) {
      if (dx[i] * dx[i] + dy[i] * dy[i] <= keep) {
        dx[i] = 0.0;
        dy[i] = 0.0;
      }
    }
    diff_adjoint(dx, dy, h, w, adj);
    for (std::size_t i = 0; i < n; ++i) rhs[i] = input[i] + beta * adj[i];
    result.cg_iterations +=
        solve_screened_poisson(rhs, beta, h, w, options.cg_tolerance, options.cg_max_iterations, s);
    ++result.rounds;

    for (std::size_t i = 0; i < n; ++i) candidate.pixels()[i] = static_cast<float>(std::clamp(s[i], 0.0, 1.0));
    const double e = l0_energy(candidate, img, options.lambda, options.zero_gradient);
    if (e <= best) {
      best = e;
      result.image = candidate;
    }
    result.energy.push_back(best);
  }
  return result;
}

Image l0_smooth(const Image& img, float lambda) {
  L0Options o;
  o.lambda = lambda;
  return l0_smooth_traced(img, o).image;
}

}  // namespace superedge
