#pragma once

#include <filesystem>

#include "semistereo/tensor.hpp"

namespace semistereo::data {

/// Reads a single-channel PFM disparity map into a 1 x H x W tensor, rows
/// top-to-bottom, absolute values. Throws FormatError on a malformed file and
/// UnsupportedError for 3-channel ("PF") files.
Tensor read_pfm(const std::filesystem::path& path);

/// Writes a 1 x H x W map as little-endian "Pf" (scale -1), rows bottom-to-top.
void write_pfm(const std::filesystem::path& path, const Tensor& map);

}  // namespace semistereo::data
