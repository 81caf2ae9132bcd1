#include "superedge/pseudo_label.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "superedge/image_io.hpp"

namespace superedge {

EdgeMap object_level_labels(const Image& img, const ObjectLabelConfig& cfg) {
  const Image smooth = l0_smooth(gaussian_blur(img, cfg.blur_sigma), cfg.l0_lambda);
  return dilate(canny(smooth, cfg.canny), cfg.dilate_radius);
}

EdgeMap pixel_level_labels(const Image& img, const EdgePredictor& predictor, const AnnotatorConfig& cfg,
                           float threshold) {
  if (!(threshold > 0.0F && threshold < 1.0F)) throw std::invalid_argument("pixel_level_labels: threshold outside (0, 1)");
  return binarize(homography_adapt(img, predictor, cfg), threshold);
}

EdgeMap combine_labels(const EdgeMap& pixel_map, const EdgeMap& object_map) {
  require_same_geometry(pixel_map, object_map, "combine_labels");
  EdgeMap out(pixel_map.height(), pixel_map.width());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.pixels()[i] = pixel_map.pixels()[i] > 0.5F || object_map.pixels()[i] > 0.5F ? 1.0F : 0.0F;
  }
  return out;
}

PseudoLabel make_pseudo_label(const Image& img, const EdgePredictor& predictor, const LabelConfig& cfg) {
  PseudoLabel l;
  l.pixel_map = pixel_level_labels(img, predictor, cfg.annotator, cfg.pixel_threshold);
  l.object_map = object_level_labels(img, cfg.object);
  l.combined = combine_labels(l.pixel_map, l.object_map);
  return l;
}

ExportSummary export_labels(const std::filesystem::path& dataset_dir, const EdgePredictor& predictor,
                            const LabelConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path images = dataset_dir / "images";
  if (!fs::is_directory(images)) throw IoError(dataset_dir.string() + ": missing images/ directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(images)) {
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError(images.string() + ": no images found");
  for (const char* d : {"pixel_labels", "object_labels", "combined_labels"}) fs::create_directories(dataset_dir / d);

  ExportSummary summary;
  std::string manifest;
  for (const auto& file : files) {
    const std::string name = file.stem().string() + ".png";
    const fs::path outs[3] = {dataset_dir / "pixel_labels" / name, dataset_dir / "object_labels" / name,
                              dataset_dir / "combined_labels" / name};
    const std::string line = "images/" + file.filename().string() + "\tpixel_labels/" + name + "\tobject_labels/" +
                             name + "\tcombined_labels/" + name + "\n";
    if (fs::exists(outs[0]) && fs::exists(outs[1]) && fs::exists(outs[2])) {
      ++summary.skipped;
      manifest += line;
      continue;
    }
    try {
      const PseudoLabel l = make_pseudo_label(read_image(file), predictor, cfg);
      write_image(outs[0], l.pixel_map);
      write_image(outs[1], l.object_map);
      write_image(outs[2], l.combined);
      ++summary.labeled;
      manifest += line;
    } catch (const NumericalError&) {
      throw;
    } catch (const std::exception& e) {
      summary.failures.push_back(file.filename().string() + ": " + e.what());
    }
  }
  const fs::path mpath = dataset_dir / "labels_manifest.txt";
  std::string existing;
  if (std::ifstream in{mpath, std::ios::binary}) existing.assign(std::istreambuf_iterator<char>(in), {});
  if (existing != manifest) {
    std::ofstream m(mpath, std::ios::binary | std::ios::trunc);
    m << manifest;
    if (!m) throw IoError("cannot write " + mpath.string());
  }
  return summary;
}

}  // namespace superedge
