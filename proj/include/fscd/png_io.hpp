#pragma once

#include <filesystem>

#include "fscd/raster.hpp"

namespace fscd {

// PNG codecs used by the dataset loader and map renderer. Inputs are strict
// about what the pipeline expects: 8-bit RGB imagery, 8-bit grayscale masks.
// All failures raise IoError with the offending path.

void write_png_rgb8(const std::filesystem::path& path, const ImageF& img);
void write_png_gray8(const std::filesystem::path& path, const MaskU8& levels);
void write_png_gray16(const std::filesystem::path& path,
                      const Raster<uint16_t>& levels);

// 8-bit RGB image scaled into [0,1]. Palette images are expanded; grayscale
// or 16-bit input is rejected as non-RGB.
ImageF read_png_rgb8(const std::filesystem::path& path);

// 8-bit grayscale levels (RGB masks are accepted and collapsed by their
// maximum channel, since distributed label rasters vary).
MaskU8 read_png_gray8(const std::filesystem::path& path);

Raster<uint16_t> read_png_gray16(const std::filesystem::path& path);

}  // namespace fscd
