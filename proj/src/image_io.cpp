#include "forge/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <vector>

namespace forge {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::string& path, const char* what) {
  throw std::runtime_error("png: " + std::string(what) + ": " + path);
}

}  // namespace

Tensor<float> read_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) fail(path, "cannot open");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) fail(path, "out of memory");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "decode error");
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // PNG is big-endian on disk
  png_read_update_info(png, info);

  depth = png_get_bit_depth(png, info);
  const int ch = static_cast<int>(png_get_channels(png, info));
  if (ch != 1 && ch != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "expected gray or RGB after alpha strip");
  }

  const size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<uint8_t> data(row_bytes * h);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = data.data() + row_bytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor<float> out(ch, h, w);
  if (depth == 16) {
    const float scale = 1.0f / 65535.0f;
    for (int y = 0; y < h; ++y) {
      const auto* row = reinterpret_cast<const uint16_t*>(data.data() + row_bytes * y);
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < ch; ++c) out(c, y, x) = scale * row[x * ch + c];
    }
  } else {
    const float scale = 1.0f / 255.0f;
    for (int y = 0; y < h; ++y) {
      const uint8_t* row = data.data() + row_bytes * y;
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < ch; ++c) out(c, y, x) = scale * row[x * ch + c];
    }
  }
  return out;
}

void write_png(const std::string& path, const Tensor<float>& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw std::invalid_argument("write_png: bit depth must be 8 or 16");
  if (img.channels() != 1 && img.channels() != 3)
    throw std::invalid_argument("write_png: expected 1 or 3 channels");

  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) fail(path, "cannot open for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) fail(path, "out of memory");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(path, "encode error");
  }
  png_init_io(png, f.get());

  const int h = img.rows(), w = img.cols(), ch = img.channels();
  png_set_IHDR(png, info, w, h, bit_depth,
               ch == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);

  auto quantize = [](float v, float maxv) {
    v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    return static_cast<uint32_t>(v * maxv + 0.5f);
  };

  if (bit_depth == 16) {
    std::vector<uint16_t> row(static_cast<size_t>(w) * ch);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < ch; ++c)
          row[x * ch + c] = static_cast<uint16_t>(quantize(img(c, y, x), 65535.0f));
      png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
    }
  } else {
    std::vector<uint8_t> row(static_cast<size_t>(w) * ch);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < ch; ++c)
          row[x * ch + c] = static_cast<uint8_t>(quantize(img(c, y, x), 255.0f));
      png_write_row(png, row.data());
    }
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

LdrImage<float> read_ldr_photo(const std::string& path) {
  Tensor<float> t = read_png(path);
  if (t.channels() == 1) {
    Tensor<float> rgb(3, t.rows(), t.cols());
    for (int c = 0; c < 3; ++c) rgb.plane(c) = t.plane(0);
    t = std::move(rgb);
  }
  return LdrImage<float>::make(std::move(t));
}

void save_maps(const std::string& dir, const SvbrdfMaps<float>& maps) {
  maps.validate();
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  write_png((base / "diffuse.png").string(), maps.diffuse, 16);
  write_png((base / "specular.png").string(), maps.specular, 16);
  write_png((base / "roughness.png").string(), maps.roughness, 16);
  Tensor<float> enc(3, maps.rows(), maps.cols());
  enc.vec() = maps.normal.vec() * 0.5f + 0.5f;
  write_png((base / "normal.png").string(), enc, 16);
}

SvbrdfMaps<float> load_maps(const std::string& dir) {
  const std::filesystem::path base(dir);
  SvbrdfMaps<float> maps;
  maps.diffuse = read_png((base / "diffuse.png").string());
  if (maps.diffuse.channels() == 1) {
    Tensor<float> rgb(3, maps.diffuse.rows(), maps.diffuse.cols());
    for (int c = 0; c < 3; ++c) rgb.plane(c) = maps.diffuse.plane(0);
    maps.diffuse = std::move(rgb);
  }
  maps.specular = luminance(read_png((base / "specular.png").string()));
  maps.roughness = luminance(read_png((base / "roughness.png").string()));
  // Quantization can nudge roughness below the floor; clamp back in.
  maps.roughness.vec() = maps.roughness.vec().max(float(kAlphaMin)).min(1.0f);

  Tensor<float> enc = read_png((base / "normal.png").string());
  if (enc.channels() != 3) throw std::runtime_error("load_maps: normal map must be RGB");
  Tensor<float> raw(3, enc.rows(), enc.cols());
  raw.vec() = enc.vec() * 2.0f - 1.0f;
  // Re-normalize: 16-bit quantization breaks exact unit length.
  maps.normal = normalize_normals(raw);
  maps.validate();
  return maps;
}

}  // namespace forge
