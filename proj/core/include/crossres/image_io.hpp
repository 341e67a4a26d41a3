#pragma once

#include <filesystem>

#include "crossres/image.hpp"

namespace crossres {

/// Decode a PNG/JPEG into a normalized [0,1] raster. Grayscale files load
/// as one channel, color as three (RGB order).
Image load_image(const std::filesystem::path& path);

/// Quantize to 8 bits and write PNG. Deterministic bytes for equal input.
void save_image(const std::filesystem::path& path, const Image& img);

}  // namespace crossres
