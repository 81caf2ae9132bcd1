#include "superedge/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace superedge {

namespace fs = std::filesystem;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string lower_ext(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw IoError(std::string("png: ") + msg); }
void png_warn(png_structp, png_const_charp) {}

Image read_png(const fs::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw IoError("png: cannot allocate read struct");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  if (!info) throw IoError("png: cannot allocate info struct");

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto width = static_cast<int>(png_get_image_width(png, info));
  const auto height = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16) png_set_strip_16(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) throw IoError(path.string() + ": unsupported channel layout");

  std::vector<unsigned char> buf(static_cast<std::size_t>(height) * width * channels);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = buf.data() + static_cast<std::size_t>(y) * width * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  if (channels == 1) {
    Image out(height, width);
    for (std::size_t i = 0; i < buf.size(); ++i) out.pixels()[i] = buf[i] / 255.0F;
    return out;
  }
  RgbImage rgb{height, width, std::vector<float>(buf.size())};
  for (std::size_t i = 0; i < buf.size(); ++i) rgb.rgb[i] = buf[i] / 255.0F;
  return to_grayscale(rgb);
}

Image read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5") throw IoError(path.string() + ": only binary PGM (P5) is supported");
  auto next_int = [&]() {
    int v = -1;
    while (in >> std::ws && in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
    }
    if (!(in >> v)) throw IoError(path.string() + ": malformed PGM header");
    return v;
  };
  const int width = next_int();
  const int height = next_int();
  const int maxval = next_int();
  in.get();
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) throw IoError(path.string() + ": bad PGM header");
  const std::size_t n = static_cast<std::size_t>(width) * height;
  Image out(height, width);
  if (maxval < 256) {
    std::vector<unsigned char> buf(n);
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n))) {
      throw IoError(path.string() + ": truncated PGM data");
    }
    for (std::size_t i = 0; i < n; ++i) out.pixels()[i] = static_cast<float>(buf[i]) / static_cast<float>(maxval);
  } else {
    std::vector<unsigned char> buf(2 * n);
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(2 * n))) {
      throw IoError(path.string() + ": truncated PGM data");
    }
    for (std::size_t i = 0; i < n; ++i) {
      out.pixels()[i] = static_cast<float>((buf[2 * i] << 8) | buf[2 * i + 1]) / static_cast<float>(maxval);
    }
  }
  return out;
}

std::vector<unsigned char> quantize(std::span<const float> px) {
  std::vector<unsigned char> out(px.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    const float v = std::clamp(px[i], 0.0F, 1.0F);
    out[i] = static_cast<unsigned char>(std::lround(v * 255.0F));
  }
  return out;
}

void write_png(const fs::path& path, int height, int width, const std::vector<unsigned char>& bytes) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw IoError("png: cannot allocate write struct");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  if (!info) throw IoError("png: cannot allocate info struct");
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, bytes.data() + static_cast<std::size_t>(y) * width);
  }
  png_write_end(png, nullptr);
  if (std::fflush(file.get()) != 0) throw IoError("cannot write " + path.string());
}

void write_pgm(const fs::path& path, int height, int width, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace

Image read_image(const fs::path& path) {
  const auto ext = lower_ext(path);
  if (ext == ".pgm") return read_pgm(path);
  return read_png(path);
}

EdgeMap read_edge_map(const fs::path& path) { return retag<EdgeTag>(read_image(path)); }

template <class Tag>
void write_image(const fs::path& path, const Raster<Tag>& raster) {
  const auto bytes = quantize(raster.pixels());
  if (lower_ext(path) == ".pgm") {
    write_pgm(path, raster.height(), raster.width(), bytes);
  } else {
    write_png(path, raster.height(), raster.width(), bytes);
  }
}

template void write_image(const fs::path&, const Raster<ImageTag>&);
template void write_image(const fs::path&, const Raster<EdgeTag>&);
template void write_image(const fs::path&, const Raster<FieldTag>&);

bool is_image_file(const fs::path& path) {
  const auto ext = lower_ext(path);
  return ext == ".png" || ext == ".pgm";
}

}  // namespace superedge
