#pragma once

#include <filesystem>
#include <utility>

#include "semistereo/tensor.hpp"

namespace semistereo::data {

/// KITTI-style 16-bit disparity PNG: disparity = raw / 256, raw 0 = invalid.
std::pair<Tensor, Mask> read_disparity_png16(const std::filesystem::path& path);
/// Inverse of read_disparity_png16. Valid values are rounded to 1/256 and
/// clamped to [1, 65535] raw so they stay distinguishable from invalid.
void write_disparity_png16(const std::filesystem::path& path, const Tensor& disparity,
                           const Mask& valid);

/// 8-bit RGB PNG <-> 3 x H x W tensor in [0, 1] (channel order R, G, B).
Tensor read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Tensor& image);

/// 8-bit single-channel mask image, 255 = set.
Mask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Mask& mask);

}  // namespace semistereo::data
