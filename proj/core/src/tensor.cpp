#include "superedge/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "superedge/errors.hpp"

namespace superedge {

namespace detail {

// 64-byte aligned so Eigen's vectorized loops split work the same way on
// every run, independent of where the allocator put the buffer.
using Buffer = std::vector<float, Eigen::aligned_allocator<float>>;

struct Node {
  Shape shape;
  Buffer data;
  Buffer grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;

  std::size_t numel() const { return data.size(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0F);
  }
};

}  // namespace detail

using detail::Buffer;
using detail::Node;
using NodePtr = std::shared_ptr<Node>;

namespace {

thread_local bool g_recording = true;

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

NodePtr make_node(Shape shape, Buffer data) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  return node;
}

// Creates an op output; history is kept only if something upstream needs it.
NodePtr make_output(Shape shape, std::initializer_list<const Tensor*> inputs) {
  auto node = make_node(shape, Buffer(static_cast<std::size_t>(shape_numel(shape)), 0.0F));
  if (!g_recording) return node;
  bool needs = false;
  for (const Tensor* t : inputs) needs = needs || (t->defined() && t->requires_grad());
  if (!needs) return node;
  node->requires_grad = true;
  for (const Tensor* t : inputs) node->inputs.push_back(t->node());
  return node;
}

bool wants_grad(const NodePtr& n) { return n && n->requires_grad; }

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

void require_defined(const Tensor& t, const char* what) {
  if (!t.defined()) throw ShapeError(std::string(what) + ": undefined tensor");
}

}  // namespace

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0F, requires_grad); }

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  for (auto d : shape) require(d > 0, "tensor extents must be positive: " + shape_to_string(shape));
  auto n = static_cast<std::size_t>(shape_numel(shape));
  auto node = make_node(std::move(shape), Buffer(n, value));
  node->requires_grad = requires_grad;
  return Tensor(node);
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data, bool requires_grad) {
  for (auto d : shape) require(d > 0, "tensor extents must be positive: " + shape_to_string(shape));
  require(static_cast<std::int64_t>(data.size()) == shape_numel(shape),
          "data length " + std::to_string(data.size()) + " does not match shape " + shape_to_string(shape));
  auto node = make_node(std::move(shape), Buffer(data.begin(), data.end()));
  node->requires_grad = requires_grad;
  return Tensor(node);
}

Tensor Tensor::scalar(float value, bool requires_grad) { return from_data({}, {value}, requires_grad); }

const Shape& Tensor::shape() const {
  require_defined(*this, "shape");
  return node_->shape;
}

std::int64_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  require(axis < s.size(), "axis out of range for shape " + shape_to_string(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return node_ ? node_->data.size() : 0; }

std::span<float> Tensor::data() {
  require_defined(*this, "data");
  return node_->data;
}

std::span<const float> Tensor::data() const {
  require_defined(*this, "data");
  return node_->data;
}

float Tensor::item() const {
  require(numel() == 1, "item() needs a single-element tensor, got " + shape_to_string(shape()));
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  require_defined(*this, "set_requires_grad");
  node_->requires_grad = value;
}

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->data.size() && !node_->data.empty(); }

std::span<float> Tensor::grad() {
  if (!has_grad()) return {};
  return node_->grad;
}

std::span<const float> Tensor::grad() const {
  if (!has_grad()) return {};
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0F);
}

Tensor Tensor::detach() const {
  require_defined(*this, "detach");
  return Tensor(make_node(node_->shape, node_->data));
}

NoGradGuard::NoGradGuard() : previous_(g_recording) { g_recording = false; }
NoGradGuard::~NoGradGuard() { g_recording = previous_; }
bool grad_recording_enabled() { return g_recording; }

// ---- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  require(a.shape() == b.shape(), "add: shape mismatch " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  auto out = make_output(a.shape(), {&a, &b});
  for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = a.data()[i] + b.data()[i];
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      for (auto& in : self.inputs) {
        if (!wants_grad(in)) continue;
        in->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  require(a.shape() == b.shape(), "mul: shape mismatch " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  auto out = make_output(a.shape(), {&a, &b});
  for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = a.data()[i] * b.data()[i];
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      auto& x = self.inputs[0];
      auto& y = self.inputs[1];
      if (wants_grad(x)) {
        x->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) x->grad[i] += self.grad[i] * y->data[i];
      }
      if (wants_grad(y)) {
        y->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) y->grad[i] += self.grad[i] * x->data[i];
      }
    };
  }
  return Tensor(out);
}

Tensor scale(const Tensor& a, float factor) {
  require_defined(a, "scale");
  auto out = make_output(a.shape(), {&a});
  for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = a.data()[i] * factor;
  if (out->requires_grad) {
    out->backward = [factor](Node& self) {
      auto& x = self.inputs[0];
      x->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) x->grad[i] += self.grad[i] * factor;
    };
  }
  return Tensor(out);
}

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  auto out = make_output({}, {&a});
  double acc = 0.0;
  for (float v : a.data()) acc += v;
  out->data[0] = static_cast<float>(acc);
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      auto& x = self.inputs[0];
      x->ensure_grad();
      for (float& g : x->grad) g += self.grad[0];
    };
  }
  return Tensor(out);
}

Tensor reshape(const Tensor& a, Shape shape) {
  require_defined(a, "reshape");
  require(shape_numel(shape) == static_cast<std::int64_t>(a.numel()),
          "reshape: cannot view " + shape_to_string(a.shape()) + " as " + shape_to_string(shape));
  auto out = make_output(std::move(shape), {&a});
  std::copy(a.data().begin(), a.data().end(), out->data.begin());
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      auto& x = self.inputs[0];
      x->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) x->grad[i] += self.grad[i];
    };
  }
  return Tensor(out);
}

Tensor slice_channels(const Tensor& a, std::int64_t begin, std::int64_t count) {
  require_defined(a, "slice_channels");
  const auto& s = a.shape();
  require(s.size() >= 2, "slice_channels: need rank >= 2, got " + shape_to_string(s));
  require(begin >= 0 && count > 0 && begin + count <= s[1],
          "slice_channels: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
              ") outside " + std::to_string(s[1]) + " channels");
  Shape os = s;
  os[1] = count;
  std::int64_t inner = 1;
  for (std::size_t i = 2; i < s.size(); ++i) inner *= s[i];
  const std::int64_t n = s[0], c = s[1];
  auto out = make_output(os, {&a});
  const float* src = a.data().data();
  for (std::int64_t b = 0; b < n; ++b) {
    std::copy_n(src + (b * c + begin) * inner, count * inner, out->data.data() + b * count * inner);
  }
  if (out->requires_grad) {
    out->backward = [n, c, begin, count, inner](Node& self) {
      auto& x = self.inputs[0];
      x->ensure_grad();
      for (std::int64_t b = 0; b < n; ++b) {
        const float* g = self.grad.data() + b * count * inner;
        float* dst = x->grad.data() + (b * c + begin) * inner;
        for (std::int64_t i = 0; i < count * inner; ++i) dst[i] += g[i];
      }
    };
  }
  return Tensor(out);
}

// ---- convolution --------------------------------------------------------------

namespace {

struct ConvGeometry {
  std::int64_t c, h, w, k, stride, pad, ho, wo;
  std::int64_t col_rows() const { return c * k * k; }
  std::int64_t col_cols() const { return ho * wo; }
  bool is_pointwise() const { return k == 1 && stride == 1 && pad == 0; }
};

void im2col(const float* img, const ConvGeometry& g, float* col) {
  for (std::int64_t ch = 0; ch < g.c; ++ch) {
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        float* row = col + ((ch * g.k + ky) * g.k + kx) * g.col_cols();
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          float* dst = row + oy * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill_n(dst, g.wo, 0.0F);
            continue;
          }
          const float* src = img + (ch * g.h + iy) * g.w;
          if (g.stride == 1) {
            // Contiguous run of in-bounds columns, zeros on either side.
            const std::int64_t shift = kx - g.pad;
            const std::int64_t lo = std::clamp<std::int64_t>(-shift, 0, g.wo);
            const std::int64_t hi = std::clamp<std::int64_t>(g.w - shift, lo, g.wo);
            std::fill_n(dst, lo, 0.0F);
            std::copy_n(src + lo + shift, hi - lo, dst + lo);
            std::fill_n(dst + hi, g.wo - hi, 0.0F);
            continue;
          }
          for (std::int64_t ox = 0; ox < g.wo; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0F;
          }
        }
      }
    }
  }
}

void col2im_add(const float* col, const ConvGeometry& g, float* img) {
  for (std::int64_t ch = 0; ch < g.c; ++ch) {
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        const float* row = col + ((ch * g.k + ky) * g.k + kx) * g.col_cols();
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          const float* src = row + oy * g.wo;
          float* dst = img + (ch * g.h + iy) * g.w;
          for (std::int64_t ox = 0; ox < g.wo; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride, int pad) {
  require_defined(input, "conv2d input");
  require_defined(weight, "conv2d weight");
  require_defined(bias, "conv2d bias");
  const auto& is = input.shape();
  const auto& ws = weight.shape();
  require(is.size() == 4, "conv2d: input must be N×C×H×W, got " + shape_to_string(is));
  require(ws.size() == 4, "conv2d: weight must be O×I×K×K, got " + shape_to_string(ws));
  require(ws[2] == ws[3] && ws[2] % 2 == 1, "conv2d: kernel must be square and odd, got " + shape_to_string(ws));
  require(ws[1] == is[1], "conv2d: input has " + std::to_string(is[1]) + " channels but weight expects " +
                              std::to_string(ws[1]));
  require(bias.shape() == Shape{ws[0]}, "conv2d: bias must have shape [" + std::to_string(ws[0]) + "], got " +
                                            shape_to_string(bias.shape()));
  require(stride >= 1 && pad >= 0, "conv2d: stride must be >= 1 and pad >= 0");

  ConvGeometry g{is[1], is[2], is[3], ws[2], stride, pad, 0, 0};
  g.ho = (g.h + 2 * pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * pad - g.k) / stride + 1;
  require(g.ho > 0 && g.wo > 0, "conv2d: kernel larger than padded input " + shape_to_string(is));
  const std::int64_t n = is[0], o = ws[0];

  auto out = make_output({n, o, g.ho, g.wo}, {&input, &weight, &bias});
  const ConstMatMap wmat(weight.data().data(), o, g.col_rows());
  Buffer col(g.is_pointwise() ? 0 : static_cast<std::size_t>(g.col_rows() * g.col_cols()));
  for (std::int64_t b = 0; b < n; ++b) {
    const float* img = input.data().data() + b * g.c * g.h * g.w;
    const float* colp = img;
    if (!g.is_pointwise()) {
      im2col(img, g, col.data());
      colp = col.data();
    }
    MatMap y(out->data.data() + b * o * g.col_cols(), o, g.col_cols());
    y.noalias() = wmat * ConstMatMap(colp, g.col_rows(), g.col_cols());
    for (std::int64_t oc = 0; oc < o; ++oc) y.row(oc).array() += bias.data()[oc];
  }

  if (out->requires_grad) {
    out->backward = [g, n, o](Node& self) {
      auto& x = self.inputs[0];
      auto& w = self.inputs[1];
      auto& bvec = self.inputs[2];
      const ConstMatMap wmat(w->data.data(), o, g.col_rows());
      Buffer col(g.is_pointwise() ? 0 : static_cast<std::size_t>(g.col_rows() * g.col_cols()));
      Buffer dcol(static_cast<std::size_t>(g.col_rows() * g.col_cols()));
      if (wants_grad(w)) w->ensure_grad();
      if (wants_grad(bvec)) bvec->ensure_grad();
      if (wants_grad(x)) x->ensure_grad();
      const bool same_padding = g.stride == 1 && g.pad * 2 + 1 == g.k && g.c * 4 >= o;
      ConvGeometry gt{o, g.ho, g.wo, g.k, 1, g.pad, g.h, g.w};
      Buffer wflip;
      if (same_padding && wants_grad(x) && !g.is_pointwise()) {
        wflip.resize(static_cast<std::size_t>(g.c * o * g.k * g.k));
        dcol.resize(static_cast<std::size_t>(o * g.k * g.k * g.h * g.w));
        for (std::int64_t oc = 0; oc < o; ++oc) {
          for (std::int64_t ic = 0; ic < g.c; ++ic) {
            for (std::int64_t t = 0; t < g.k * g.k; ++t) {
              wflip[((ic * o + oc) * g.k * g.k) + (g.k * g.k - 1 - t)] = w->data[(oc * g.c + ic) * g.k * g.k + t];
            }
          }
        }
      }
      for (std::int64_t b = 0; b < n; ++b) {
        const ConstMatMap dy(self.grad.data() + b * o * g.col_cols(), o, g.col_cols());
        if (wants_grad(bvec)) {
          for (std::int64_t oc = 0; oc < o; ++oc) bvec->grad[oc] += dy.row(oc).sum();
        }
        if (wants_grad(w)) {
          const float* img = x->data.data() + b * g.c * g.h * g.w;
          const float* colp = img;
          if (!g.is_pointwise()) {
            im2col(img, g, col.data());
            colp = col.data();
          }
          MatMap dw(w->grad.data(), o, g.col_rows());
          dw.noalias() += dy * ConstMatMap(colp, g.col_rows(), g.col_cols()).transpose();
        }
        if (wants_grad(x)) {
          float* dimg = x->grad.data() + b * g.c * g.h * g.w;
          if (g.is_pointwise()) {
            MatMap dx(dimg, g.col_rows(), g.col_cols());
            dx.noalias() += wmat.transpose() * dy;
          } else if (same_padding) {
            // Input gradient of a stride-1 "same" convolution is the same
            // convolution of dy with the spatially flipped, transposed kernel.
            im2col(dy.data(), gt, dcol.data());
            MatMap dx(dimg, g.c, g.h * g.w);
            dx.noalias() += ConstMatMap(wflip.data(), g.c, o * g.k * g.k) * ConstMatMap(dcol.data(), o * g.k * g.k, g.h * g.w);
          } else {
            MatMap dc(dcol.data(), g.col_rows(), g.col_cols());
            dc.noalias() = wmat.transpose() * dy;
            col2im_add(dcol.data(), g, dimg);
          }
        }
      }
    };
  }
  return Tensor(out);
}

// ---- batch norm -----------------------------------------------------------------

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                  Tensor& running_var, bool training, BatchNormOptions options) {
  require_defined(input, "batch_norm input");
  const auto& s = input.shape();
  require(s.size() == 4, "batch_norm: input must be N×C×H×W, got " + shape_to_string(s));
  const std::int64_t n = s[0], c = s[1], hw = s[2] * s[3];
  const Shape cshape{c};
  require(gamma.defined() && gamma.shape() == cshape, "batch_norm: gamma must have shape " + shape_to_string(cshape));
  require(beta.defined() && beta.shape() == cshape, "batch_norm: beta must have shape " + shape_to_string(cshape));
  require(running_mean.defined() && running_mean.shape() == cshape, "batch_norm: running_mean shape mismatch");
  require(running_var.defined() && running_var.shape() == cshape, "batch_norm: running_var shape mismatch");

  const std::int64_t m = n * hw;
  std::vector<float> mean(c), invstd(c);
  const float* x = input.data().data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    if (training) {
      double acc = 0.0;
      for (std::int64_t b = 0; b < n; ++b) {
        const float* p = x + (b * c + ch) * hw;
        for (std::int64_t i = 0; i < hw; ++i) acc += p[i];
      }
      const double mu = acc / static_cast<double>(m);
      double sq = 0.0;
      for (std::int64_t b = 0; b < n; ++b) {
        const float* p = x + (b * c + ch) * hw;
        for (std::int64_t i = 0; i < hw; ++i) {
          const double d = p[i] - mu;
          sq += d * d;
        }
      }
      const double var = sq / static_cast<double>(m);
      mean[ch] = static_cast<float>(mu);
      invstd[ch] = static_cast<float>(1.0 / std::sqrt(var + options.eps));
      const double unbiased = m > 1 ? sq / static_cast<double>(m - 1) : var;
      auto& rm = running_mean.data()[ch];
      auto& rv = running_var.data()[ch];
      rm = static_cast<float>((1.0 - options.momentum) * rm + options.momentum * mu);
      rv = static_cast<float>((1.0 - options.momentum) * rv + options.momentum * unbiased);
    } else {
      mean[ch] = running_mean.data()[ch];
      invstd[ch] = static_cast<float>(1.0 / std::sqrt(static_cast<double>(running_var.data()[ch]) + options.eps));
    }
  }

  auto out = make_output(s, {&input, &gamma, &beta});
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const float* p = x + (b * c + ch) * hw;
      float* q = out->data.data() + (b * c + ch) * hw;
      const float ga = gamma.data()[ch], be = beta.data()[ch], mu = mean[ch], is = invstd[ch];
      for (std::int64_t i = 0; i < hw; ++i) q[i] = ga * ((p[i] - mu) * is) + be;
    }
  }

  if (out->requires_grad) {
    out->backward = [n, c, hw, m, training, mean = std::move(mean), invstd = std::move(invstd)](Node& self) {
      auto& xin = self.inputs[0];
      auto& ga = self.inputs[1];
      auto& be = self.inputs[2];
      if (wants_grad(ga)) ga->ensure_grad();
      if (wants_grad(be)) be->ensure_grad();
      if (wants_grad(xin)) xin->ensure_grad();
      for (std::int64_t ch = 0; ch < c; ++ch) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::int64_t b = 0; b < n; ++b) {
          const float* p = xin->data.data() + (b * c + ch) * hw;
          const float* dy = self.grad.data() + (b * c + ch) * hw;
          for (std::int64_t i = 0; i < hw; ++i) {
            sum_dy += dy[i];
            sum_dy_xhat += static_cast<double>(dy[i]) * ((p[i] - mean[ch]) * invstd[ch]);
          }
        }
        if (wants_grad(ga)) ga->grad[ch] += static_cast<float>(sum_dy_xhat);
        if (wants_grad(be)) be->grad[ch] += static_cast<float>(sum_dy);
        if (!wants_grad(xin)) continue;
        const float gval = ga->data[ch];
        for (std::int64_t b = 0; b < n; ++b) {
          const float* p = xin->data.data() + (b * c + ch) * hw;
          const float* dy = self.grad.data() + (b * c + ch) * hw;
          float* dx = xin->grad.data() + (b * c + ch) * hw;
          if (training) {
            const double k = gval * invstd[ch] / static_cast<double>(m);
            for (std::int64_t i = 0; i < hw; ++i) {
              const double xhat = (p[i] - mean[ch]) * invstd[ch];
              dx[i] += static_cast<float>(k * (static_cast<double>(m) * dy[i] - sum_dy - xhat * sum_dy_xhat));
            }
          } else {
            const float k = gval * invstd[ch];
            for (std::int64_t i = 0; i < hw; ++i) dx[i] += k * dy[i];
          }
        }
      }
    };
  }
  return Tensor(out);
}

// ---- activations and pooling ---------------------------------------------------

Tensor relu(const Tensor& input) {
  require_defined(input, "relu");
  auto out = make_output(input.shape(), {&input});
  const auto in = input.data();
  for (std::size_t i = 0; i < in.size(); ++i) out->data[i] = in[i] > 0.0F ? in[i] : 0.0F;
  if (out->requires_grad) {
    out->backward = [](Node& self) {
      auto& x = self.inputs[0];
      x->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        if (x->data[i] > 0.0F) x->grad[i] += self.grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor max_pool2x2(const Tensor& input) {
  require_defined(input, "max_pool2x2");
  const auto& s = input.shape();
  require(s.size() == 4, "max_pool2x2: input must be N×C×H×W, got " + shape_to_string(s));
  require(s[2] >= 2 && s[3] >= 2, "max_pool2x2: spatial extent below 2 in " + shape_to_string(s));
  const std::int64_t planes = s[0] * s[1], h = s[2], w = s[3], ho = h / 2, wo = w / 2;
  auto out = make_output({s[0], s[1], ho, wo}, {&input});
  std::vector<std::int32_t> argmax(out->requires_grad ? out->data.size() : 0);
  const float* x = input.data().data();
  for (std::int64_t p = 0; p < planes; ++p) {
    for (std::int64_t oy = 0; oy < ho; ++oy) {
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        std::int64_t best = (p * h + 2 * oy) * w + 2 * ox;
        for (std::int64_t dy = 0; dy < 2; ++dy) {
          for (std::int64_t dx = 0; dx < 2; ++dx) {
            const std::int64_t idx = (p * h + 2 * oy + dy) * w + 2 * ox + dx;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::int64_t o = (p * ho + oy) * wo + ox;
        out->data[o] = x[best];
        if (!argmax.empty()) argmax[o] = static_cast<std::int32_t>(best);
      }
    }
  }
  if (out->requires_grad) {
    out->backward = [argmax = std::move(argmax)](Node& self) {
      auto& xin = self.inputs[0];
      xin->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) xin->grad[argmax[i]] += self.grad[i];
    };
  }
  return Tensor(out);
}

Tensor softmax_channel(const Tensor& input) {
  require_defined(input, "softmax_channel");
  const auto& s = input.shape();
  require(s.size() == 4 && s[1] >= 1, "softmax_channel: input must be N×C×H×W, got " + shape_to_string(s));
  const std::int64_t n = s[0], c = s[1], hw = s[2] * s[3];
  auto out = make_output(s, {&input});
  const float* x = input.data().data();
  std::vector<double> e(c);
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t i = 0; i < hw; ++i) {
      float mx = -std::numeric_limits<float>::infinity();
      for (std::int64_t ch = 0; ch < c; ++ch) mx = std::max(mx, x[(b * c + ch) * hw + i]);
      double total = 0.0;
      for (std::int64_t ch = 0; ch < c; ++ch) {
        e[ch] = std::exp(static_cast<double>(x[(b * c + ch) * hw + i]) - mx);
        total += e[ch];
      }
      for (std::int64_t ch = 0; ch < c; ++ch) out->data[(b * c + ch) * hw + i] = static_cast<float>(e[ch] / total);
    }
  }
  if (out->requires_grad) {
    out->backward = [n, c, hw](Node& self) {
      auto& xin = self.inputs[0];
      xin->ensure_grad();
      for (std::int64_t b = 0; b < n; ++b) {
        for (std::int64_t i = 0; i < hw; ++i) {
          double dot = 0.0;
          for (std::int64_t ch = 0; ch < c; ++ch) {
            const auto k = (b * c + ch) * hw + i;
            dot += static_cast<double>(self.data[k]) * self.grad[k];
          }
          for (std::int64_t ch = 0; ch < c; ++ch) {
            const auto k = (b * c + ch) * hw + i;
            xin->grad[k] += static_cast<float>(self.data[k] * (self.grad[k] - dot));
          }
        }
      }
    };
  }
  return Tensor(out);
}

// ---- attention --------------------------------------------------------------------

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  require_defined(q, "attention q");
  require_defined(k, "attention k");
  require_defined(v, "attention v");
  const auto& qs = q.shape();
  const auto& ks = k.shape();
  const auto& vs = v.shape();
  require(qs.size() == 3 && ks.size() == 3 && vs.size() == 3,
          "attention: q, k, v must be B×d×L, got " + shape_to_string(qs) + ", " + shape_to_string(ks) + ", " +
              shape_to_string(vs));
  require(qs == ks, "attention: q " + shape_to_string(qs) + " and k " + shape_to_string(ks) + " must match");
  require(vs[0] == qs[0] && vs[2] == qs[2],
          "attention: v " + shape_to_string(vs) + " must share batch and position count with q " + shape_to_string(qs));
  const std::int64_t batch = qs[0], d = qs[1], len = qs[2], dv = vs[1];
  const float inv_sqrt_d = 1.0F / std::sqrt(static_cast<float>(d));

  // Scores, softmax and the weighted sum run in double; the softmax is kept
  // in float for backward.
  auto out = make_output({batch, dv, len}, {&q, &k, &v});
  Buffer attn(static_cast<std::size_t>(batch * len * len));
  Eigen::MatrixXd s(len, len);
  for (std::int64_t b = 0; b < batch; ++b) {
    const ConstMatMap qm(q.data().data() + b * d * len, d, len);
    const ConstMatMap km(k.data().data() + b * d * len, d, len);
    const ConstMatMap vm(v.data().data() + b * dv * len, dv, len);
    s.noalias() = qm.cast<double>().transpose() * km.cast<double>();
    s *= 1.0 / std::sqrt(static_cast<double>(d));
    for (std::int64_t i = 0; i < len; ++i) {
      s.row(i).array() = (s.row(i).array() - s.row(i).maxCoeff()).exp();
      s.row(i) /= s.row(i).sum();
    }
    MatMap(attn.data() + b * len * len, len, len) = s.cast<float>();
    MatMap o(out->data.data() + b * dv * len, dv, len);
    o = (vm.cast<double>() * s.transpose()).cast<float>();
  }

  if (out->requires_grad) {
    out->backward = [batch, d, len, dv, inv_sqrt_d, attn = std::move(attn)](Node& self) {
      auto& qn = self.inputs[0];
      auto& kn = self.inputs[1];
      auto& vn = self.inputs[2];
      for (auto* in : {&qn, &kn, &vn}) {
        if (wants_grad(*in)) (*in)->ensure_grad();
      }
      RowMat da(len, len), ds(len, len);
      for (std::int64_t b = 0; b < batch; ++b) {
        const ConstMatMap a(attn.data() + b * len * len, len, len);
        const ConstMatMap dout(self.grad.data() + b * dv * len, dv, len);
        const ConstMatMap qm(qn->data.data() + b * d * len, d, len);
        const ConstMatMap km(kn->data.data() + b * d * len, d, len);
        const ConstMatMap vm(vn->data.data() + b * dv * len, dv, len);
        if (wants_grad(vn)) {
          MatMap dvm(vn->grad.data() + b * dv * len, dv, len);
          dvm.noalias() += dout * a;
        }
        if (!wants_grad(qn) && !wants_grad(kn)) continue;
        da.noalias() = dout.transpose() * vm;
        for (std::int64_t i = 0; i < len; ++i) {
          const float dot = (da.row(i).array() * a.row(i).array()).sum();
          ds.row(i) = a.row(i).array() * (da.row(i).array() - dot);
        }
        ds *= inv_sqrt_d;
        if (wants_grad(qn)) {
          MatMap dq(qn->grad.data() + b * d * len, d, len);
          dq.noalias() += km * ds.transpose();
        }
        if (wants_grad(kn)) {
          MatMap dk(kn->grad.data() + b * d * len, d, len);
          dk.noalias() += qm * ds;
        }
      }
    };
  }
  return Tensor(out);
}

// ---- loss --------------------------------------------------------------------------

Tensor cross_entropy_cell(const Tensor& logits, std::span<const std::int32_t> labels, std::span<const float> weights) {
  require_defined(logits, "cross_entropy_cell");
  const auto& s = logits.shape();
  require(s.size() == 4, "cross_entropy_cell: logits must be B×C×Hc×Wc, got " + shape_to_string(s));
  const std::int64_t n = s[0], c = s[1], hw = s[2] * s[3];
  require(static_cast<std::int64_t>(labels.size()) == n * hw,
          "cross_entropy_cell: expected " + std::to_string(n * hw) + " labels, got " + std::to_string(labels.size()));
  require(weights.size() == labels.size(), "cross_entropy_cell: weights and labels differ in length");
  for (auto l : labels) {
    if (l < 0 || l >= c) {
      throw std::out_of_range("cross_entropy_cell: label " + std::to_string(l) + " outside [0, " +
                              std::to_string(c - 1) + "]");
    }
  }
  for (float w : weights) {
    if (!(w >= 0.0F)) throw std::invalid_argument("cross_entropy_cell: weights must be nonnegative");
  }

  const float* x = logits.data().data();
  std::vector<float> lse(static_cast<std::size_t>(n * hw));
  double total = 0.0;
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t i = 0; i < hw; ++i) {
      float mx = -std::numeric_limits<float>::infinity();
      for (std::int64_t ch = 0; ch < c; ++ch) mx = std::max(mx, x[(b * c + ch) * hw + i]);
      double acc = 0.0;
      for (std::int64_t ch = 0; ch < c; ++ch) acc += std::exp(static_cast<double>(x[(b * c + ch) * hw + i]) - mx);
      const double l = mx + std::log(acc);
      const auto cell = b * hw + i;
      lse[cell] = static_cast<float>(l);
      total += weights[cell] * (l - x[(b * c + labels[cell]) * hw + i]);
    }
  }

  auto out = make_output({}, {&logits});
  out->data[0] = static_cast<float>(total);
  if (out->requires_grad) {
    std::vector<std::int32_t> lab(labels.begin(), labels.end());
    std::vector<float> wts(weights.begin(), weights.end());
    out->backward = [n, c, hw, lse = std::move(lse), lab = std::move(lab), wts = std::move(wts)](Node& self) {
      auto& xin = self.inputs[0];
      xin->ensure_grad();
      const float up = self.grad[0];
      for (std::int64_t b = 0; b < n; ++b) {
        for (std::int64_t i = 0; i < hw; ++i) {
          const auto cell = b * hw + i;
          const float w = wts[cell] * up;
          if (w == 0.0F) continue;
          for (std::int64_t ch = 0; ch < c; ++ch) {
            const auto kidx = (b * c + ch) * hw + i;
            const double p = std::exp(static_cast<double>(xin->data[kidx]) - lse[cell]);
            xin->grad[kidx] += static_cast<float>(w * (p - (ch == lab[cell] ? 1.0 : 0.0)));
          }
        }
      }
    };
  }
  return Tensor(out);
}

// ---- backward -------------------------------------------------------------------

namespace {

std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child && child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // inputs before outputs
}

void run_backward(Node* root, std::span<const float> seed) {
  if (!root->requires_grad) throw std::invalid_argument("backward: tensor does not require grad");
  auto order = topo_order(root);
  for (Node* node : order) {
    if (node->backward) node->grad.assign(node->data.size(), 0.0F);
  }
  root->ensure_grad();
  for (std::size_t i = 0; i < seed.size(); ++i) root->grad[i] += seed[i];
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

}  // namespace

void backward(const Tensor& loss) {
  require_defined(loss, "backward");
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_to_string(loss.shape()));
  }
  const float one = 1.0F;
  run_backward(loss.node().get(), std::span<const float>(&one, 1));
}

void backward(const Tensor& output, std::span<const float> seed) {
  require_defined(output, "backward");
  require(seed.size() == output.numel(), "backward: seed length does not match output");
  run_backward(output.node().get(), seed);
}

// ---- Adam ------------------------------------------------------------------------

AdamState AdamState::for_params(std::span<const Tensor> params, float lr) {
  AdamState s;
  s.lr = lr;
  for (const auto& p : params) {
    s.m.emplace_back(p.numel(), 0.0F);
    s.v.emplace_back(p.numel(), 0.0F);
  }
  return s;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  require(state.m.size() == params.size() && state.v.size() == params.size(),
          "adam_step: optimizer state tracks " + std::to_string(state.m.size()) + " tensors, got " +
              std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(state.m[i].size() == params[i].numel() && state.v[i].size() == params[i].numel(),
            "adam_step: state buffer " + std::to_string(i) + " does not match parameter shape " +
                shape_to_string(params[i].shape()));
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(static_cast<double>(state.beta1), static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(static_cast<double>(state.beta2), static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = params[i].grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const float gj = g.empty() ? 0.0F : g[j];
      m[j] = state.beta1 * m[j] + (1.0F - state.beta1) * gj;
      v[j] = state.beta2 * v[j] + (1.0F - state.beta2) * gj * gj;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= static_cast<float>(state.lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
}

}  // namespace superedge
