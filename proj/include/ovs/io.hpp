#pragma once

#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>

#include <png.h>

#include "ovs/image.hpp"

namespace ovs {

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path);
  return f;
}
}  // namespace detail

// 8-bit RGB PNG. Color values quantized from/to [0,1].
inline Image read_png(const std::string& path) {
  auto f = detail::open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng error while reading " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  Image img(w, h, 3);
  std::vector<png_byte> row(static_cast<size_t>(w) * 3);
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(x, y, c) = row[static_cast<size_t>(x) * 3 + c] / 255.f;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline void write_png(const std::string& path, const Image& img) {
  if (img.channels != 3 && img.channels != 1) throw IoError("write_png: need 1 or 3 channels");
  auto f = detail::open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng error while writing " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<size_t>(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = img.at(x, y, img.channels == 1 ? 0 : c);
        row[static_cast<size_t>(x) * 3 + c] =
            static_cast<png_byte>(std::clamp(std::lround(v * 255.f), 0L, 255L));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Binary PGM (P5), masks stored as 0/255.
inline Mask read_pgm(const std::string& path) {
  auto f = detail::open_file(path, "rb");
  char magic[3] = {};
  int w = 0, h = 0, maxval = 0;
  if (std::fscanf(f.get(), "%2s %d %d %d", magic, &w, &h, &maxval) != 4 ||
      std::strcmp(magic, "P5") != 0 || maxval <= 0 || maxval > 255)
    throw IoError("bad PGM header in " + path);
  std::fgetc(f.get());  // single whitespace after maxval
  Mask m = make_mask(w, h);
  std::vector<unsigned char> row(static_cast<size_t>(w));
  for (int y = 0; y < h; ++y) {
    if (std::fread(row.data(), 1, row.size(), f.get()) != row.size())
      throw IoError("truncated PGM " + path);
    for (int x = 0; x < w; ++x) m.at(x, y) = row[x] >= maxval / 2 + 1 ? 1.f : 0.f;
  }
  return m;
}

inline void write_pgm(const std::string& path, const Mask& m) {
  auto f = detail::open_file(path, "wb");
  std::fprintf(f.get(), "P5\n%d %d\n255\n", m.width, m.height);
  std::vector<unsigned char> row(static_cast<size_t>(m.width));
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) row[x] = m.at(x, y) >= 0.5f ? 255 : 0;
    if (std::fwrite(row.data(), 1, row.size(), f.get()) != row.size())
      throw IoError("short write to " + path);
  }
}

// Middlebury .flo: "PIEH", int32 width, int32 height, row-major float32 (u,v).
inline FlowField read_flo(const std::string& path) {
  auto f = detail::open_file(path, "rb");
  char magic[4];
  if (std::fread(magic, 1, 4, f.get()) != 4 || std::memcmp(magic, "PIEH", 4) != 0)
    throw IoError("bad .flo magic in " + path);
  int32_t w = 0, h = 0;
  if (std::fread(&w, 4, 1, f.get()) != 1 || std::fread(&h, 4, 1, f.get()) != 1 || w <= 0 || h <= 0)
    throw IoError("bad .flo dims in " + path);
  FlowField flow(w, h);
  std::vector<float> row(static_cast<size_t>(w) * 2);
  for (int y = 0; y < h; ++y) {
    if (std::fread(row.data(), 4, row.size(), f.get()) != row.size())
      throw IoError("truncated .flo " + path);
    for (int x = 0; x < w; ++x) {
      flow.u[flow.idx(x, y)] = row[2 * static_cast<size_t>(x)];
      flow.v[flow.idx(x, y)] = row[2 * static_cast<size_t>(x) + 1];
      flow.valid.at(x, y) = 1.f;
    }
  }
  return flow;
}

inline void write_flo(const std::string& path, const FlowField& flow) {
  auto f = detail::open_file(path, "wb");
  const int32_t w = flow.width, h = flow.height;
  std::fwrite("PIEH", 1, 4, f.get());
  std::fwrite(&w, 4, 1, f.get());
  std::fwrite(&h, 4, 1, f.get());
  std::vector<float> row(static_cast<size_t>(w) * 2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      row[2 * static_cast<size_t>(x)] = static_cast<float>(flow.u[flow.idx(x, y)]);
      row[2 * static_cast<size_t>(x) + 1] = static_cast<float>(flow.v[flow.idx(x, y)]);
    }
    if (std::fwrite(row.data(), 4, row.size(), f.get()) != row.size())
      throw IoError("short write to " + path);
  }
}

}  // namespace ovs
