#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace superedge {

struct DatasetEntry {
  std::string id;  // file stem
  std::filesystem::path image;
  std::optional<std::filesystem::path> edges;  // ground truth
  std::optional<std::filesystem::path> pixel_label;
  std::optional<std::filesystem::path> object_label;
  std::optional<std::filesystem::path> combined_label;
};

struct Dataset {
  std::filesystem::path root;
  std::vector<DatasetEntry> entries;  // lexicographic by image file name
  std::vector<std::string> warnings;
};

// Enumerates PNG/PGM files directly under root/images and pairs each with a
// same-stem file in edges/ and the label directories when present.
// Subdirectories are ignored.
Dataset ingest_dataset(const std::filesystem::path& root);

// Same-stem lookup in a flat directory (any supported image extension).
std::optional<std::filesystem::path> find_by_stem(const std::filesystem::path& dir, const std::string& stem);

}  // namespace superedge
