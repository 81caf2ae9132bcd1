#pragma once

#include <vector>

#include "superedge/image.hpp"

namespace superedge {

struct CannyOptions {
  float low = 0.1F;   // fraction of the per-image maximum gradient magnitude
  float high = 0.2F;
  float sigma = 1.0F;  // Gaussian pre-smoothing
};

// Gaussian pre-smooth, Sobel gradients, 4-direction non-maximum suppression,
// and 8-connected hysteresis. Thresholds apply to the gradient magnitude
// divided by its image maximum. Returns a binary map.
EdgeMap canny(const Image& img, float low, float high, float sigma = 1.0F);
inline EdgeMap canny(const Image& img, const CannyOptions& o) { return canny(img, o.low, o.high, o.sigma); }

struct SobelGradients {
  Field gx;
  Field gy;
  Field magnitude;
};
SobelGradients sobel(const Image& img);

struct L0Options {
  float lambda = 0.02F;
  float kappa = 2.0F;
  float beta_max = 1e5F;
  float cg_tolerance = 1e-5F;
  int cg_max_iterations = 500;
  // A forward difference counts as nonzero above this magnitude (half an
  // 8-bit quantization step).
  float zero_gradient = 1.0F / 512.0F;
};

struct L0Result {
  Image image;
  // L0 energy of the retained iterate: entry 0 is the input, then one entry
  // per beta round. Non-increasing.
  std::vector<double> energy;
  int rounds = 0;
  int cg_iterations = 0;
};

// Half-quadratic splitting for min_S |S - I|^2 + lambda * C(S), where C counts
// pixels with a nonzero forward difference. Each round thresholds the
// auxiliary gradient field and solves (1 + beta D^T D) S = I + beta D^T (h, v)
// with Jacobi-preconditioned conjugate gradients. The iterate with the lowest
// energy seen so far is retained, so the returned energy trace never rises.
L0Result l0_smooth_traced(const Image& img, const L0Options& options);
Image l0_smooth(const Image& img, float lambda);

// |S - I|^2 + lambda * C(S).
double l0_energy(const Image& smoothed, const Image& input, float lambda, float zero_gradient = 1.0F / 512.0F);
std::size_t count_nonzero_gradients(const Image& img, float zero_gradient = 1.0F / 512.0F);

}  // namespace superedge
