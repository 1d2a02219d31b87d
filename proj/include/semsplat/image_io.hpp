#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "semsplat/tensor.hpp"

namespace semsplat {

using Palette = std::vector<std::array<std::uint8_t, 3>>;

/// 8-bit PNG to an H x W x 3 image in [0, 1]. Gray and alpha inputs are
/// converted to RGB.
Image read_png_rgb(const std::filesystem::path& path);

/// Values are clamped to [0, 1] and rounded to 8 bits.
void write_png_rgb(const std::filesystem::path& path, const Image& image);

/// Single-channel indices from a palette (indices kept) or 8-bit gray PNG.
LabelMap read_png_labels(const std::filesystem::path& path);

/// Indexed PNG. The palette is padded to 256 entries.
void write_png_indexed(const std::filesystem::path& path, const LabelMap& labels, const Palette& palette);

/// Fixed class palette: black for 0, distinct colours for 1..254, white for 255.
const Palette& class_palette();

} // namespace semsplat
