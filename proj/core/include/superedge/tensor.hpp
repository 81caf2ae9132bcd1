#pragma once

// Dense float32 tensors with a dynamic reverse-mode tape.
//
// A Tensor is a shared handle: copying it aliases the same storage, the way
// framework tensors do. Operations record a backward closure on their output
// whenever any input requires a gradient and recording is enabled (see
// NoGradGuard). `backward(loss)` walks the recorded graph in reverse
// topological order.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace superedge {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<float> data, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::int64_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<float> data();
  std::span<const float> data() const;
  float item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  // Empty span when no gradient has been populated yet.
  std::span<float> grad();
  std::span<const float> grad() const;
  void zero_grad();

  // Same values, fresh storage, no history.
  Tensor detach() const;

  // Internal: used by operation implementations.
  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_recording_enabled();

// ---- operations -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);
Tensor sum(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
// Channels [begin, begin + count) of a tensor whose axis 1 is channels.
Tensor slice_channels(const Tensor& a, std::int64_t begin, std::int64_t count);

// input N×C×H×W, weight O×C×K×K (K odd), bias O.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int pad);

struct BatchNormOptions {
  float eps = 1e-5F;
  float momentum = 0.1F;
};

// running_mean / running_var are plain (non-differentiable) C-length tensors,
// updated in place when training is true.
Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                  Tensor& running_var, bool training, BatchNormOptions options = {});

Tensor relu(const Tensor& input);

// 2×2 window, stride 2. Odd trailing rows/columns are dropped.
Tensor max_pool2x2(const Tensor& input);

// Softmax over axis 1 of an N×C×H×W tensor.
Tensor softmax_channel(const Tensor& input);

// q, k: B×d×L; v: B×dv×L. Returns B×dv×L with
// out[:, i] = sum_j softmax_j(q[:, i]·k[:, j] / sqrt(d)) v[:, j].
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);

// logits B×C×Hc×Wc; labels and weights laid out [B][Hc][Wc].
// Returns sum over cells of weight · (−log softmax(logits)[label]).
Tensor cross_entropy_cell(const Tensor& logits, std::span<const std::int32_t> labels,
                          std::span<const float> weights);

// Populates gradients of every requires_grad tensor reachable from `loss`.
// Leaf gradients accumulate across calls; interior gradients reflect the
// latest call only.
void backward(const Tensor& loss);

// Seeds the output gradient explicitly (used for vector-Jacobian products).
void backward(const Tensor& output, std::span<const float> seed);

// ---- optimizer ------------------------------------------------------------

struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
  float lr = 1e-3F;
  float beta1 = 0.9F;
  float beta2 = 0.999F;
  float eps = 1e-8F;

  static AdamState for_params(std::span<const Tensor> params, float lr = 1e-3F);
};

// Bias-corrected Adam update using each parameter's populated gradient.
// Parameters without a gradient are treated as having zero gradient.
void adam_step(std::span<Tensor> params, AdamState& state);

}  // namespace superedge
