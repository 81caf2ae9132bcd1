#include "superedge/training.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace superedge {

namespace {

EdgeMap pad_zero(const EdgeMap& m, int height, int width) {
  EdgeMap out(height, width);
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) out(y, x) = m(y, x);
  }
  return out;
}

}  // namespace

TrainingSample make_training_sample(const Image& image, const EdgeMap& pixel_map, const EdgeMap& object_map) {
  require_same_geometry(image, pixel_map, "make_training_sample");
  require_same_geometry(image, object_map, "make_training_sample");
  TrainingSample s;
  s.image = pad_to_multiple(image, kCellSize);
  s.pixel_map = pad_zero(binarize(pixel_map, 0.5F), s.image.height(), s.image.width());
  s.object_map = pad_zero(binarize(object_map, 0.5F), s.image.height(), s.image.width());
  return s;
}

TrainingSample synthetic_training_sample(const SyntheticSample& s, int object_dilation) {
  return make_training_sample(s.image, s.gt_edges, dilate(s.gt_edges, object_dilation));
}

void train(std::span<const TrainingSample> samples, ModelParams& params, AdamState& adam, const TrainOptions& options,
           int start_epoch, const EpochCallback& on_epoch) {
  if (samples.empty()) throw std::invalid_argument("train: no samples");
  if (options.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  adam.lr = options.lr;
  std::vector<std::size_t> order(samples.size());
  for (int epoch = start_epoch + 1; epoch <= options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = make_rng(options.seed, {streams::kShuffle, static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), shuffle);

    EpochSummary summary;
    summary.epoch = epoch;
    std::size_t pos = 0;
    while (pos < order.size()) {
      // A batch never mixes geometries; a size change starts a new batch.
      const std::size_t first = order[pos];
      std::vector<Image> images;
      TrainingBatch batch;
      while (pos < order.size() && static_cast<int>(images.size()) < options.batch_size &&
             samples[order[pos]].image.same_geometry(samples[first].image)) {
        const std::size_t i = order[pos++];
        const auto& s = samples[i];
        Rng labels = make_rng(options.seed, {streams::kCellLabels, static_cast<std::uint64_t>(epoch), i});
        images.push_back(s.image);
        batch.pixel_labels.push_back(edgemap_to_cells(s.pixel_map, labels));
        batch.object_labels.push_back(edgemap_to_cells(s.object_map, labels));
        batch.object_maps.push_back(s.object_map);
      }
      batch.images = stack_images(images);
      const StepLosses l = train_step(batch, params, adam, options.loss);
      summary.pixel += l.pixel;
      summary.object += l.object;
      ++summary.steps;
    }
    summary.pixel /= summary.steps;
    summary.object /= summary.steps;
    if (on_epoch) on_epoch(summary, params, adam);
  }
}

}  // namespace superedge
