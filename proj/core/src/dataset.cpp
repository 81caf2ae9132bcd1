#include "superedge/dataset.hpp"

#include <algorithm>
#include <map>

#include "superedge/errors.hpp"
#include "superedge/image_io.hpp"

namespace superedge {

namespace {

std::map<std::string, std::filesystem::path> index_dir(const std::filesystem::path& dir) {
  std::map<std::string, std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file() || !is_image_file(e.path())) continue;
    const std::string stem = e.path().stem().string();
    auto it = out.find(stem);
    // Deterministic choice when several extensions share a stem.
    if (it == out.end() || e.path().filename() < it->second.filename()) out[stem] = e.path();
  }
  return out;
}

std::optional<std::filesystem::path> lookup(const std::map<std::string, std::filesystem::path>& m,
                                            const std::string& stem) {
  auto it = m.find(stem);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

}  // namespace

std::optional<std::filesystem::path> find_by_stem(const std::filesystem::path& dir, const std::string& stem) {
  return lookup(index_dir(dir), stem);
}

Dataset ingest_dataset(const std::filesystem::path& root) {
  const auto images_dir = root / "images";
  if (!std::filesystem::is_directory(images_dir)) throw IoError(root.string() + ": missing images/ directory");
  Dataset ds;
  ds.root = root;
  std::vector<std::filesystem::path> images;
  for (const auto& e : std::filesystem::directory_iterator(images_dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) images.push_back(e.path());
  }
  std::sort(images.begin(), images.end(), [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
  if (images.empty()) throw IoError(images_dir.string() + ": no PNG/PGM images found");

  const auto edges = index_dir(root / "edges");
  const auto pixel = index_dir(root / "pixel_labels");
  const auto object = index_dir(root / "object_labels");
  const auto combined = index_dir(root / "combined_labels");
  for (const auto& img : images) {
    DatasetEntry e;
    e.id = img.stem().string();
    e.image = img;
    e.edges = lookup(edges, e.id);
    e.pixel_label = lookup(pixel, e.id);
    e.object_label = lookup(object, e.id);
    e.combined_label = lookup(combined, e.id);
    if (!edges.empty() && !e.edges) ds.warnings.push_back(img.filename().string() + ": no ground truth in edges/");
    ds.entries.push_back(std::move(e));
  }
  for (const auto& [stem, path] : edges) {
    const bool matched = std::any_of(ds.entries.begin(), ds.entries.end(), [&](const auto& e) { return e.id == stem; });
    if (!matched) ds.warnings.push_back(path.filename().string() + ": ground truth without an image");
  }
  return ds;
}

}  // namespace superedge
