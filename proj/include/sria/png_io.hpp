#pragma once

#include <filesystem>

#include "sria/raster.hpp"

namespace sria::png {

// Readers accept any PNG color type / bit depth and convert: gray is
// replicated to RGB, RGB gets opaque alpha, color is reduced to luma
// (ITU-R 601 weights) for gray. Masks treat values >= 128 as foreground.
// All failures raise DataError naming the path.

GrayImage read_gray(const std::filesystem::path& path);
RgbImage read_rgb(const std::filesystem::path& path);
RgbaImage read_rgba(const std::filesystem::path& path);
BinaryMask read_mask(const std::filesystem::path& path);

// Writers emit byte-stable files: fixed compression level, no time or text
// chunks, so identical rasters always produce identical bytes.

void write(const std::filesystem::path& path, const GrayImage& img);
void write(const std::filesystem::path& path, const RgbImage& img);
void write(const std::filesystem::path& path, const RgbaImage& img);
/// Single channel, 0 = background, 255 = foreground.
void write(const std::filesystem::path& path, const BinaryMask& mask);

}  // namespace sria::png
