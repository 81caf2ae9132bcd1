#pragma once

#include <filesystem>

#include "superedge/image.hpp"

namespace superedge {

// Decodes 8/16-bit grayscale or RGB(A) PNG and binary PGM (P5). Color input
// goes through to_grayscale; values map linearly onto [0, 1].
Image read_image(const std::filesystem::path& path);
EdgeMap read_edge_map(const std::filesystem::path& path);

// 8-bit grayscale, round(v * 255) after clamping to [0, 1]. The format is
// chosen by extension: ".pgm" writes P5, anything else writes PNG.
template <class Tag>
void write_image(const std::filesystem::path& path, const Raster<Tag>& raster);

bool is_image_file(const std::filesystem::path& path);

}  // namespace superedge
