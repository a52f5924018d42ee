#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fscd {

// Single-channel H x W raster, row-major.
template <typename T>
struct Raster {
  int h = 0;
  int w = 0;
  std::vector<T> v;

  Raster() = default;
  Raster(int height, int width, T fill = T{})
      : h(height), w(width), v(size_t(height) * size_t(width), fill) {}

  size_t size() const { return v.size(); }
  T& at(int i, int j) { return v[size_t(i) * w + j]; }
  const T& at(int i, int j) const { return v[size_t(i) * w + j]; }

  bool operator==(const Raster&) const = default;
};

using RasterF = Raster<float>;
using RasterD = Raster<double>;
using MaskU8 = Raster<uint8_t>;

// Interleaved H x W x C image, channels-last, values in [0,1].
struct ImageF {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<float> v;

  ImageF() = default;
  ImageF(int height, int width, int channels, float fill = 0.f)
      : h(height),
        w(width),
        c(channels),
        v(size_t(height) * size_t(width) * size_t(channels), fill) {}

  float& at(int i, int j, int ch) { return v[(size_t(i) * w + j) * c + ch]; }
  const float& at(int i, int j, int ch) const {
    return v[(size_t(i) * w + j) * c + ch];
  }

  bool operator==(const ImageF&) const = default;
};

}  // namespace fscd
