#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "superedge/classical.hpp"
#include "superedge/homography.hpp"
#include "superedge/image.hpp"

namespace superedge {

struct ObjectLabelConfig {
  float blur_sigma = 1.5F;
  float l0_lambda = 0.02F;
  CannyOptions canny;
  int dilate_radius = 1;
};

struct PseudoLabel {
  EdgeMap pixel_map;
  EdgeMap object_map;
  EdgeMap combined;
};

// dilate(canny(l0_smooth(gaussian_blur(img))))
EdgeMap object_level_labels(const Image& img, const ObjectLabelConfig& cfg = {});

// binarize(homography_adapt(img, predictor, cfg), threshold)
EdgeMap pixel_level_labels(const Image& img, const EdgePredictor& predictor, const AnnotatorConfig& cfg,
                           float threshold = 0.005F);

// Pixelwise OR.
EdgeMap combine_labels(const EdgeMap& pixel_map, const EdgeMap& object_map);

struct LabelConfig {
  AnnotatorConfig annotator;
  ObjectLabelConfig object;
  float pixel_threshold = 0.005F;
};

PseudoLabel make_pseudo_label(const Image& img, const EdgePredictor& predictor, const LabelConfig& cfg);

struct ExportSummary {
  int labeled = 0;
  int skipped = 0;  // outputs already present
  std::vector<std::string> failures;  // "<file>: <reason>"
};

// Labels every image in dataset_dir/images into pixel_labels/, object_labels/
// and combined_labels/ (same stem, .png) and lists them in
// labels_manifest.txt (image, pixel, object, combined per line).
// Images whose three outputs already exist are not recomputed.
ExportSummary export_labels(const std::filesystem::path& dataset_dir, const EdgePredictor& predictor,
                            const LabelConfig& cfg);

}  // namespace superedge
