#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "superedge/image.hpp"
#include "superedge/model.hpp"
#include "superedge/synthetic.hpp"

namespace superedge {

// One supervised example: the pixel head learns pixel_map, the object head
// learns object_map. All three share a geometry that is a multiple of 8.
struct TrainingSample {
  Image image;
  EdgeMap pixel_map;
  EdgeMap object_map;
};

// Pads image (replicate) and maps (zeros) to multiples of 8.
TrainingSample make_training_sample(const Image& image, const EdgeMap& pixel_map, const EdgeMap& object_map);

// Stage-1 supervision: pixel head on the exact GT, object head on the GT
// dilated by `object_dilation`.
TrainingSample synthetic_training_sample(const SyntheticSample& s, int object_dilation = 1);

struct TrainOptions {
  int epochs = 100;
  int batch_size = 16;
  float lr = 1e-3F;
  LossConfig loss;
  std::uint64_t seed = 0;
};

struct EpochSummary {
  int epoch = 0;  // 1-based
  double pixel = 0.0;
  double object = 0.0;
  int steps = 0;
};

using EpochCallback = std::function<void(const EpochSummary&, const ModelParams&, const AdamState&)>;

// Runs epochs start_epoch+1 .. options.epochs. Each epoch shuffles with the
// stream (seed, epoch) and redraws multi-pixel cell labels with
// (seed, epoch, sample), so a resumed run replays the same trajectory.
void train(std::span<const TrainingSample> samples, ModelParams& params, AdamState& adam, const TrainOptions& options,
           int start_epoch = 0, const EpochCallback& on_epoch = {});

}  // namespace superedge
