#include "fscd/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "fscd/errors.hpp"

namespace fscd {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

[[noreturn]] void fail(const std::filesystem::path& path, const char* what) {
  throw IoError(path.string() + ": " + what);
}

// Decode into 8-bit rows with `channels` channels; palette expanded, 16-bit
// rejected when strict8 is set.
std::vector<std::vector<uint8_t>> read_rows(const std::filesystem::path& path,
                                            int want_channels, int* out_h,
                                            int* out_w, bool allow_rgb_as_gray) {
  FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f) throw IoError("missing file: " + path.string());

  PngReader r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                 nullptr);
  if (!r.png) fail(path, "libpng init failed");
  r.info = png_create_info_struct(r.png);
  if (!r.info) fail(path, "libpng init failed");
  if (setjmp(png_jmpbuf(r.png))) fail(path, "failed to decode PNG");

  png_init_io(r.png, f.get());
  png_read_info(r.png, r.info);

  const int bit_depth = png_get_bit_depth(r.png, r.info);
  int color = png_get_color_type(r.png, r.info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (bit_depth == 16) fail(path, "16-bit input where 8-bit was expected");
  if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
  png_read_update_info(r.png, r.info);

  color = png_get_color_type(r.png, r.info);
  const int channels = png_get_channels(r.png, r.info);
  const int h = int(png_get_image_height(r.png, r.info));
  const int w = int(png_get_image_width(r.png, r.info));

  if (want_channels == 3 && channels != 3)
    fail(path, "non-RGB input where 8-bit RGB was expected");
  if (want_channels == 1 && channels != 1 &&
      !(allow_rgb_as_gray && channels == 3))
    fail(path, "non-grayscale input where an 8-bit grayscale mask was expected");

  std::vector<std::vector<uint8_t>> rows(static_cast<size_t>(h));
  std::vector<png_bytep> ptrs(static_cast<size_t>(h));
  for (int i = 0; i < h; ++i) {
    rows[size_t(i)].resize(size_t(w) * size_t(channels));
    ptrs[size_t(i)] = rows[size_t(i)].data();
  }
  png_read_image(r.png, ptrs.data());
  png_read_end(r.png, nullptr);

  if (want_channels == 1 && channels == 3) {
    for (auto& row : rows) {
      for (int j = 0; j < w; ++j)
        row[size_t(j)] = std::max({row[size_t(j) * 3], row[size_t(j) * 3 + 1],
                                   row[size_t(j) * 3 + 2]});
      row.resize(size_t(w));
    }
  }
  *out_h = h;
  *out_w = w;
  return rows;
}

void write_rows(const std::filesystem::path& path, int h, int w, int color_type,
                int bit_depth, const std::vector<std::vector<uint8_t>>& rows) {
  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw IoError("cannot write " + path.string());

  PngWriter wr;
  wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                   nullptr);
  if (!wr.png) fail(path, "libpng init failed");
  wr.info = png_create_info_struct(wr.png);
  if (!wr.info) fail(path, "libpng init failed");
  if (setjmp(png_jmpbuf(wr.png))) fail(path, "failed to encode PNG");

  png_init_io(wr.png, f.get());
  png_set_IHDR(wr.png, wr.info, png_uint_32(w), png_uint_32(h), bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(wr.png, wr.info);
  for (const auto& row : rows)
    png_write_row(wr.png, const_cast<png_bytep>(row.data()));
  png_write_end(wr.png, nullptr);
}

uint8_t quantize8(float v) {
  const float c = std::min(1.f, std::max(0.f, v));
  return uint8_t(std::lround(c * 255.f));
}

}  // namespace

void write_png_rgb8(const std::filesystem::path& path, const ImageF& img) {
  if (img.c != 3)
    throw IoError("write_png_rgb8: image has " + std::to_string(img.c) +
                  " channels");
  std::vector<std::vector<uint8_t>> rows(size_t(img.h));
  for (int i = 0; i < img.h; ++i) {
    rows[size_t(i)].resize(size_t(img.w) * 3);
    for (int j = 0; j < img.w; ++j)
      for (int ch = 0; ch < 3; ++ch)
        rows[size_t(i)][size_t(j) * 3 + ch] = quantize8(img.at(i, j, ch));
  }
  write_rows(path, img.h, img.w, PNG_COLOR_TYPE_RGB, 8, rows);
}

void write_png_gray8(const std::filesystem::path& path, const MaskU8& levels) {
  std::vector<std::vector<uint8_t>> rows(size_t(levels.h));
  for (int i = 0; i < levels.h; ++i)
    rows[size_t(i)].assign(levels.v.begin() + size_t(i) * levels.w,
                           levels.v.begin() + size_t(i + 1) * levels.w);
  write_rows(path, levels.h, levels.w, PNG_COLOR_TYPE_GRAY, 8, rows);
}

void write_png_gray16(const std::filesystem::path& path,
                      const Raster<uint16_t>& levels) {
  // PNG stores 16-bit samples big-endian; pack explicitly.
  std::vector<std::vector<uint8_t>> rows(size_t(levels.h));
  for (int i = 0; i < levels.h; ++i) {
    rows[size_t(i)].resize(size_t(levels.w) * 2);
    for (int j = 0; j < levels.w; ++j) {
      const uint16_t v = levels.at(i, j);
      rows[size_t(i)][size_t(j) * 2] = uint8_t(v >> 8);
      rows[size_t(i)][size_t(j) * 2 + 1] = uint8_t(v & 0xFF);
    }
  }
  write_rows(path, levels.h, levels.w, PNG_COLOR_TYPE_GRAY, 16, rows);
}

ImageF read_png_rgb8(const std::filesystem::path& path) {
  int h = 0, w = 0;
  auto rows = read_rows(path, 3, &h, &w, false);
  ImageF img(h, w, 3);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int ch = 0; ch < 3; ++ch)
        img.at(i, j, ch) = float(rows[size_t(i)][size_t(j) * 3 + ch]) / 255.f;
  return img;
}

MaskU8 read_png_gray8(const std::filesystem::path& path) {
  int h = 0, w = 0;
  auto rows = read_rows(path, 1, &h, &w, true);
  MaskU8 m(h, w);
  for (int i = 0; i < h; ++i)
    std::copy(rows[size_t(i)].begin(), rows[size_t(i)].end(),
              m.v.begin() + size_t(i) * w);
  return m;
}

Raster<uint16_t> read_png_gray16(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f) throw IoError("missing file: " + path.string());
  PngReader r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                 nullptr);
  if (!r.png) fail(path, "libpng init failed");
  r.info = png_create_info_struct(r.png);
  if (!r.info) fail(path, "libpng init failed");
  if (setjmp(png_jmpbuf(r.png))) fail(path, "failed to decode PNG");
  png_init_io(r.png, f.get());
  png_read_info(r.png, r.info);
  if (png_get_bit_depth(r.png, r.info) != 16 ||
      png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY)
    fail(path, "expected 16-bit grayscale PNG");
  const int h = int(png_get_image_height(r.png, r.info));
  const int w = int(png_get_image_width(r.png, r.info));
  std::vector<std::vector<uint8_t>> rows(static_cast<size_t>(h));
  std::vector<png_bytep> ptrs(static_cast<size_t>(h));
  for (int i = 0; i < h; ++i) {
    rows[size_t(i)].resize(size_t(w) * 2);
    ptrs[size_t(i)] = rows[size_t(i)].data();
  }
  png_read_image(r.png, ptrs.data());
  png_read_end(r.png, nullptr);
  Raster<uint16_t> out(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      out.at(i, j) = uint16_t((uint16_t(rows[size_t(i)][size_t(j) * 2]) << 8) |
                              rows[size_t(i)][size_t(j) * 2 + 1]);
  return out;
}

}  // namespace fscd
