#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "superedge/random.hpp"
#include "superedge/tensor.hpp"

namespace superedge::testing {

using OpFn = std::function<Tensor(std::vector<Tensor>&)>;

struct GradCheck {
  double error = 0.0;   // norm-wise relative error over all checked inputs
  int worst_input = -1;  // input with the largest absolute discrepancy
};

inline Tensor random_tensor(Shape shape, Rng& rng, float lo = -1.0F, float hi = 1.0F) {
  std::uniform_real_distribution<float> d(lo, hi);
  std::vector<float> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = d(rng);
  return Tensor::from_data(std::move(shape), std::move(v));
}

// Compares the vector-Jacobian product w^T J from the tape against central
// differences of sum(w * f(x)) evaluated in double. The gradients of all
// checked inputs form one vector g; error = |g_analytic - g_numeric| /
// max(|g_analytic|, |g_numeric|).
inline GradCheck gradcheck(const OpFn& fn, std::vector<Tensor> inputs, const std::vector<bool>& check, Rng& rng,
                           double h = 1e-3) {
  for (std::size_t k = 0; k < inputs.size(); ++k) inputs[k].set_requires_grad(check[k]);
  Tensor y = fn(inputs);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<float> w(y.numel());
  for (auto& v : w) v = static_cast<float>(nd(rng));
  backward(y, w);

  auto objective = [&] {
    NoGradGuard guard;
    const Tensor out = fn(inputs);
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += static_cast<double>(w[i]) * out.data()[i];
    return s;
  };

  GradCheck result;
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0, worst_diff = -1.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (!check[k]) continue;
    std::vector<float> analytic(inputs[k].numel(), 0.0F);
    if (inputs[k].has_grad()) analytic.assign(inputs[k].grad().begin(), inputs[k].grad().end());
    double input_diff2 = 0.0;
    auto data = inputs[k].data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const float orig = data[i];
      const float up = static_cast<float>(orig + h), down = static_cast<float>(orig - h);
      data[i] = up;
      const double sp = objective();
      data[i] = down;
      const double sm = objective();
      data[i] = orig;
      const double numeric = (sp - sm) / (static_cast<double>(up) - static_cast<double>(down));
      input_diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += static_cast<double>(analytic[i]) * analytic[i];
      n2 += numeric * numeric;
    }
    diff2 += input_diff2;
    if (input_diff2 > worst_diff) {
      worst_diff = input_diff2;
      result.worst_input = static_cast<int>(k);
    }
  }
  result.error = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
  return result;
}

}  // namespace superedge::testing
