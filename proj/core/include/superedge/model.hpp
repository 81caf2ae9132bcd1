#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "superedge/image.hpp"
#include "superedge/random.hpp"
#include "superedge/tensor.hpp"

namespace superedge {

inline constexpr int kCellSize = 8;
inline constexpr int kCellClasses = 65;  // 64 in-patch positions + dustbin
inline constexpr int kDustbin = 64;

struct ModelShape {
  std::array<int, 4> encoder_channels{64, 64, 128, 128};
  int head_channels = 256;
};

// conv (+bias) followed by batch norm.
struct ConvBn {
  Tensor weight;  // O×C×K×K
  Tensor bias;
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;

  Tensor forward(const Tensor& x, bool training);
};

struct ModelParams {
  ModelShape shape;
  std::array<ConvBn, 8> encoder;  // two per block
  ConvBn pixel_hidden;            // 3×3 → head_channels
  ConvBn pixel_out;               // 1×1 → 65
  ConvBn object_hidden;           // 3×3 → head_channels
  ConvBn object_qkv;              // 1×1 → 3·65
  Tensor attn_proj_weight;        // 65×65×1×1
  Tensor attn_proj_bias;

  // He-normal conv weights, zero biases, unit gamma, zero beta.
  static ModelParams create(std::uint64_t seed, const ModelShape& shape = {});
  // Every weight and bias 0, BN at identity.
  static ModelParams zeros(const ModelShape& shape = {});

  // Every stored tensor (trainable parameters and BN running statistics), in
  // a fixed order with stable names.
  std::vector<std::pair<std::string, Tensor>> named_tensors() const;
  std::vector<Tensor> trainable() const;
};

struct ModelOutput {
  Tensor pixel_logits;   // B×65×H/8×W/8
  Tensor object_logits;  // B×65×H/8×W/8
  Tensor features;       // encoder output B×C×H/8×W/8
};

// images: B×1×H×W with H, W multiples of 8.
ModelOutput forward(const Tensor& images, ModelParams& params, bool training);

struct CellLabels {
  int rows = 0;
  int cols = 0;
  std::vector<std::int32_t> index;  // row-major, 0..64
};

CellLabels edgemap_to_cells(const EdgeMap& binary, Rng& rng);

// Channel softmax, dustbin dropped, depth-to-space. One map per batch entry.
std::vector<EdgeMap> cells_to_edgemaps(const Tensor& logits);
EdgeMap cells_to_edgemap(const Tensor& logits);

struct LossConfig {
  float lambda = 1.1F;
};

struct ObjectWeights {
  double alpha = 0.0;  // dustbin cells
  double beta = 0.0;   // edge cells
};

// alpha = lambda·|Y+| / N, beta = |Y-| / N, counted over pixels of the map.
ObjectWeights object_class_weights(const EdgeMap& pseudo_gt, float lambda);

// Mean per-cell cross-entropy, averaged over the batch.
Tensor loss_pix(const Tensor& pixel_logits, std::span<const CellLabels> labels);

// Class-weighted cell cross-entropy summed over cells, averaged over the batch.
Tensor loss_obj(const Tensor& object_logits, std::span<const CellLabels> labels, std::span<const EdgeMap> pseudo_gt,
                const LossConfig& cfg);

Tensor loss_total(const Tensor& l_pix, const Tensor& l_obj);

struct TrainingBatch {
  Tensor images;  // B×1×H×W
  std::vector<CellLabels> pixel_labels;
  std::vector<CellLabels> object_labels;
  std::vector<EdgeMap> object_maps;  // maps the object labels were drawn from
};

struct StepLosses {
  double pixel = 0.0;
  double object = 0.0;
  double total() const { return pixel + object; }
};

// forward → loss_total → backward → adam_step → zero grads.
StepLosses train_step(const TrainingBatch& batch, ModelParams& params, AdamState& adam, const LossConfig& cfg);

// Stacks images (all the same size) into B×1×H×W.
Tensor stack_images(std::span<const Image> images);

struct Prediction {
  EdgeMap pixel;
  EdgeMap object;
};

// Eval-mode forward with replicate padding to multiples of 8, cropped back.
Prediction predict(const Image& img, ModelParams& params);
std::vector<Prediction> predict_batch(std::span<const Image> images, ModelParams& params);

}  // namespace superedge
