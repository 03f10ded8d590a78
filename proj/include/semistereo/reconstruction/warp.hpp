#pragma once

#include <utility>

#include "semistereo/autograd.hpp"

namespace semistereo::recon {

struct WarpResult {
  ag::Var warped;
  /// x - d(x, y) lies in [0, W - 1].
  Mask inbounds;
};

/// Samples source (C x H x W) at (x - d(x, y), y) with linear interpolation
/// along the row. Out-of-bounds pixels are 0 and cleared in `inbounds`.
/// Differentiable in both source and disparity (1 x H x W, finite, >= 0;
/// negative values throw ContractError).
WarpResult warp_right_to_left(ag::Var source, ag::Var disparity);
std::pair<Tensor, Mask> warp_right_to_left(const Tensor& source, const Tensor& disparity);

/// Nearest-neighbour downsampling of a disparity map to (height, width) with
/// values multiplied by width / W so they stay in target-scale pixels.
/// Throws ContractError when asked to upsample.
Tensor resample_disparity_nn(const Tensor& disparity, int height, int width);
ag::Var resample_disparity_nn(ag::Var disparity, int height, int width);
/// Same index mapping for masks.
Mask resample_mask_nn(const Mask& mask, int height, int width);

}  // namespace semistereo::recon
