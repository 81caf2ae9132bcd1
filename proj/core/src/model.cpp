#include "superedge/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace superedge {

namespace {

ConvBn make_conv_bn(int out, int in, int k, Rng* rng) {
  ConvBn c;
  std::vector<float> w(static_cast<std::size_t>(out) * in * k * k, 0.0F);
  if (rng != nullptr) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / (in * k * k)));
    for (auto& v : w) v = static_cast<float>(dist(*rng));
  }
  c.weight = Tensor::from_data({out, in, k, k}, std::move(w), true);
  c.bias = Tensor::zeros({out}, true);
  c.gamma = Tensor::full({out}, 1.0F, true);
  c.beta = Tensor::zeros({out}, true);
  c.running_mean = Tensor::zeros({out});
  c.running_var = Tensor::full({out}, 1.0F);
  return c;
}

ModelParams build(const ModelShape& shape, Rng* rng) {
  ModelParams p;
  p.shape = shape;
  int in = 1;
  for (int b = 0; b < 4; ++b) {
    const int ch = shape.encoder_channels[b];
    p.encoder[2 * b] = make_conv_bn(ch, in, 3, rng);
    p.encoder[2 * b + 1] = make_conv_bn(ch, ch, 3, rng);
    in = ch;
  }
  p.pixel_hidden = make_conv_bn(shape.head_channels, in, 3, rng);
  p.pixel_out = make_conv_bn(kCellClasses, shape.head_channels, 1, rng);
  p.object_hidden = make_conv_bn(shape.head_channels, in, 3, rng);
  p.object_qkv = make_conv_bn(3 * kCellClasses, shape.head_channels, 1, rng);
  std::vector<float> w(static_cast<std::size_t>(kCellClasses) * kCellClasses, 0.0F);
  if (rng != nullptr) {
    std::normal_distribution<double> dist(0.0, std::sqrt(1.0 / kCellClasses));
    for (auto& v : w) v = static_cast<float>(dist(*rng));
  }
  p.attn_proj_weight = Tensor::from_data({kCellClasses, kCellClasses, 1, 1}, std::move(w), true);
  p.attn_proj_bias = Tensor::zeros({kCellClasses}, true);
  return p;
}

void append_conv_bn(std::vector<std::pair<std::string, Tensor>>& out, const std::string& name, const ConvBn& c) {
  out.emplace_back(name + ".weight", c.weight);
  out.emplace_back(name + ".bias", c.bias);
  out.emplace_back(name + ".bn.gamma", c.gamma);
  out.emplace_back(name + ".bn.beta", c.beta);
  out.emplace_back(name + ".bn.running_mean", c.running_mean);
  out.emplace_back(name + ".bn.running_var", c.running_var);
}

}  // namespace

Tensor ConvBn::forward(const Tensor& x, bool training) {
  const int pad = static_cast<int>(weight.dim(2) / 2);
  return batch_norm(conv2d(x, weight, bias, 1, pad), gamma, beta, running_mean, running_var, training);
}

ModelParams ModelParams::create(std::uint64_t seed, const ModelShape& shape) {
  Rng rng = make_rng(seed, {streams::kInit});
  return build(shape, &rng);
}

ModelParams ModelParams::zeros(const ModelShape& shape) { return build(shape, nullptr); }

std::vector<std::pair<std::string, Tensor>> ModelParams::named_tensors() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (int i = 0; i < 8; ++i) {
    append_conv_bn(out, "encoder.block" + std::to_string(i / 2 + 1) + ".conv" + std::to_string(i % 2 + 1), encoder[i]);
  }
  append_conv_bn(out, "pixel_head.conv1", pixel_hidden);
  append_conv_bn(out, "pixel_head.conv2", pixel_out);
  append_conv_bn(out, "object_head.conv1", object_hidden);
  append_conv_bn(out, "object_head.qkv", object_qkv);
  out.emplace_back("object_head.attn_proj.weight", attn_proj_weight);
  out.emplace_back("object_head.attn_proj.bias", attn_proj_bias);
  return out;
}

std::vector<Tensor> ModelParams::trainable() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named_tensors()) {
    if (t.requires_grad()) out.push_back(t);
  }
  return out;
}

ModelOutput forward(const Tensor& images, ModelParams& params, bool training) {
  const auto& s = images.shape();
  if (s.size() != 4 || s[1] != 1) throw ShapeError("forward: expected B×1×H×W input, got " + shape_to_string(s));
  if (s[2] % kCellSize != 0 || s[3] % kCellSize != 0) {
    throw ShapeError("forward: height and width must be multiples of 8, got " + shape_to_string(s));
  }
  Tensor x = images;
  for (int b = 0; b < 4; ++b) {
    x = relu(params.encoder[2 * b].forward(x, training));
    x = relu(params.encoder[2 * b + 1].forward(x, training));
    if (b < 3) x = max_pool2x2(x);
  }
  ModelOutput out;
  out.features = x;
  out.pixel_logits = params.pixel_out.forward(relu(params.pixel_hidden.forward(x, training)), training);

  const Tensor qkv = params.object_qkv.forward(relu(params.object_hidden.forward(x, training)), training);
  const std::int64_t b = s[0], hc = x.dim(2), wc = x.dim(3);
  const Tensor packed = reshape(qkv, {b, 3 * kCellClasses, hc * wc});
  const Tensor attended = scaled_dot_attention(slice_channels(packed, 0, kCellClasses),
                                               slice_channels(packed, kCellClasses, kCellClasses),
                                               slice_channels(packed, 2 * kCellClasses, kCellClasses));
  out.object_logits =
      conv2d(reshape(attended, {b, kCellClasses, hc, wc}), params.attn_proj_weight, params.attn_proj_bias, 1, 0);
  return out;
}

CellLabels edgemap_to_cells(const EdgeMap& binary, Rng& rng) {
  if (binary.height() % kCellSize != 0 || binary.width() % kCellSize != 0) {
    throw ShapeError("edgemap_to_cells: dimensions must be multiples of 8");
  }
  CellLabels c;
  c.rows = binary.height() / kCellSize;
  c.cols = binary.width() / kCellSize;
  c.index.assign(static_cast<std::size_t>(c.rows) * c.cols, kDustbin);
  std::vector<std::int32_t> on;
  for (int r = 0; r < c.rows; ++r) {
    for (int q = 0; q < c.cols; ++q) {
      on.clear();
      for (int k = 0; k < 64; ++k) {
        if (binary(r * kCellSize + k / kCellSize, q * kCellSize + k % kCellSize) > 0.5F) on.push_back(k);
      }
      if (on.size() == 1) {
        c.index[r * c.cols + q] = on[0];
      } else if (!on.empty()) {
        c.index[r * c.cols + q] =
            on[std::uniform_int_distribution<std::size_t>(0, on.size() - 1)(rng)];
      }
    }
  }
  return c;
}

std::vector<EdgeMap> cells_to_edgemaps(const Tensor& logits) {
  const auto& s = logits.shape();
  if (s.size() != 4 || s[1] != kCellClasses) {
    throw ShapeError("cells_to_edgemap: expected B×65×Hc×Wc, got " + shape_to_string(s));
  }
  const std::int64_t b = s[0], hc = s[2], wc = s[3];
  const Tensor prob = [&] {
    NoGradGuard guard;
    return softmax_channel(logits);
  }();
  const auto p = prob.data();
  std::vector<EdgeMap> out;
  for (std::int64_t n = 0; n < b; ++n) {
    EdgeMap m(static_cast<int>(hc * kCellSize), static_cast<int>(wc * kCellSize));
    for (int k = 0; k < 64; ++k) {
      const float* plane = p.data() + (n * kCellClasses + k) * hc * wc;
      for (std::int64_t r = 0; r < hc; ++r) {
        for (std::int64_t q = 0; q < wc; ++q) {
          m(static_cast<int>(r * kCellSize + k / kCellSize), static_cast<int>(q * kCellSize + k % kCellSize)) =
              plane[r * wc + q];
        }
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

EdgeMap cells_to_edgemap(const Tensor& logits) {
  if (logits.rank() != 4 || logits.dim(0) != 1) throw ShapeError("cells_to_edgemap: expected a batch of one");
  return std::move(cells_to_edgemaps(logits).front());
}

ObjectWeights object_class_weights(const EdgeMap& pseudo_gt, float lambda) {
  const double n = static_cast<double>(pseudo_gt.size());
  const double pos = static_cast<double>(count_on(pseudo_gt));
  return {static_cast<double>(lambda) * pos / n, (n - pos) / n};
}

namespace {

void check_labels(const Tensor& logits, std::span<const CellLabels> labels, const char* what) {
  const auto& s = logits.shape();
  if (s.size() != 4 || s[1] != kCellClasses || static_cast<std::size_t>(s[0]) != labels.size()) {
    throw ShapeError(std::string(what) + ": logits " + shape_to_string(s) + " do not match " +
                     std::to_string(labels.size()) + " label grids");
  }
  for (const auto& l : labels) {
    if (l.rows != s[2] || l.cols != s[3] || l.index.size() != static_cast<std::size_t>(l.rows) * l.cols) {
      throw ShapeError(std::string(what) + ": label grid does not match the logit grid");
    }
  }
}

}  // namespace

Tensor loss_pix(const Tensor& pixel_logits, std::span<const CellLabels> labels) {
  check_labels(pixel_logits, labels, "loss_pix");
  const auto& s = pixel_logits.shape();
  // 64/(H·W) per image is 1/(Hc·Wc); the batch mean adds 1/B.
  const float w = 1.0F / static_cast<float>(s[0] * s[2] * s[3]);
  std::vector<std::int32_t> idx;
  for (const auto& l : labels) idx.insert(idx.end(), l.index.begin(), l.index.end());
  const std::vector<float> weights(idx.size(), w);
  return cross_entropy_cell(pixel_logits, idx, weights);
}

Tensor loss_obj(const Tensor& object_logits, std::span<const CellLabels> labels, std::span<const EdgeMap> pseudo_gt,
                const LossConfig& cfg) {
  check_labels(object_logits, labels, "loss_obj");
  if (pseudo_gt.size() != labels.size()) throw ShapeError("loss_obj: one pseudo-GT map per label grid required");
  if (!(cfg.lambda > 0.0F)) throw std::invalid_argument("loss_obj: lambda must be positive");
  const double inv_b = 1.0 / static_cast<double>(labels.size());
  std::vector<std::int32_t> idx;
  std::vector<float> weights;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const auto& l = labels[n];
    if (pseudo_gt[n].height() != l.rows * kCellSize || pseudo_gt[n].width() != l.cols * kCellSize) {
      throw ShapeError("loss_obj: pseudo-GT geometry does not match the label grid");
    }
    const ObjectWeights ow = object_class_weights(pseudo_gt[n], cfg.lambda);
    for (auto k : l.index) {
      idx.push_back(k);
      weights.push_back(static_cast<float>((k == kDustbin ? ow.alpha : ow.beta) * inv_b));
    }
  }
  return cross_entropy_cell(object_logits, idx, weights);
}

Tensor loss_total(const Tensor& l_pix, const Tensor& l_obj) { return add(l_pix, l_obj); }

Tensor stack_images(std::span<const Image> images) {
  if (images.empty()) throw ShapeError("stack_images: empty batch");
  const int h = images[0].height(), w = images[0].width();
  std::vector<float> data;
  data.reserve(images.size() * images[0].size());
  for (const auto& img : images) {
    if (img.height() != h || img.width() != w) throw ShapeError("stack_images: images differ in size");
    data.insert(data.end(), img.pixels().begin(), img.pixels().end());
  }
  return Tensor::from_data({static_cast<std::int64_t>(images.size()), 1, h, w}, std::move(data));
}

StepLosses train_step(const TrainingBatch& batch, ModelParams& params, AdamState& adam, const LossConfig& cfg) {
  const ModelOutput out = forward(batch.images, params, true);
  const Tensor lp = loss_pix(out.pixel_logits, batch.pixel_labels);
  const Tensor lo = loss_obj(out.object_logits, batch.object_labels, batch.object_maps, cfg);
  const Tensor total = loss_total(lp, lo);
  StepLosses losses{lp.item(), lo.item()};
  if (!std::isfinite(losses.pixel) || !std::isfinite(losses.object)) {
    throw NumericalError("train_step: non-finite loss (pixel " + std::to_string(losses.pixel) + ", object " +
                         std::to_string(losses.object) + ") at step " + std::to_string(adam.step + 1));
  }
  backward(total);
  auto params_list = params.trainable();
  adam_step(params_list, adam);
  for (auto& p : params_list) p.zero_grad();
  return losses;
}

std::vector<Prediction> predict_batch(std::span<const Image> images, ModelParams& params) {
  std::vector<Image> padded;
  padded.reserve(images.size());
  for (const auto& img : images) padded.push_back(pad_to_multiple(img, kCellSize));
  NoGradGuard guard;
  const ModelOutput out = forward(stack_images(padded), params, false);
  auto pix = cells_to_edgemaps(out.pixel_logits);
  auto obj = cells_to_edgemaps(out.object_logits);
  std::vector<Prediction> preds;
  for (std::size_t i = 0; i < images.size(); ++i) {
    preds.push_back({crop(pix[i], images[i].height(), images[i].width()),
                     crop(obj[i], images[i].height(), images[i].width())});
  }
  return preds;
}

Prediction predict(const Image& img, ModelParams& params) {
  return std::move(predict_batch(std::span<const Image>(&img, 1), params).front());
}

}  // namespace superedge
