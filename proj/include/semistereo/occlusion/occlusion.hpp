#pragma once

#include <random>
#include <utility>

#include "semistereo/data/stereo_sample.hpp"

namespace semistereo::occlusion {

/// Left-right consistency occlusion: (x, y) is occluded when x - dL < 0 or
/// |dL(x, y) - dR(round(x - dL), y)| > tol. Both maps are 1 x H x W, >= 0.
Mask occlusion_from_disparity(const Tensor& d_left, const Tensor& d_right, double tol = 1.0);

/// Occlusion target for supervised training: the dataset map when present,
/// otherwise derived from left/right disparity. Throws InsufficientDataError
/// when neither is available.
Mask occlusion_target(const data::StereoSample& sample);

enum class OccluderSource { noise, copied_from_image };

struct OccluderRect {
  int x, y, w, h;
};

struct OccluderPatch {
  OccluderRect rect;
  Tensor texture;  // 3 x h x w in [0, 1]
  OccluderSource source = OccluderSource::noise;

  /// Throws ContractError unless the rect lies inside a height x width image
  /// and 8 <= w, h <= min(height, width) / 3.
  void validate(int height, int width) const;
};

/// Draws a random patch (size uniform in the allowed range, position uniform
/// inside the frame). copied_from_image takes the texture from a random
/// window of `image`.
OccluderPatch draw_occluder(int height, int width, std::mt19937_64& rng, OccluderSource source,
                            const Tensor* image = nullptr);

/// Pastes the patch into the right image and returns the augmented sample and
/// the rect footprint in left-view coordinates (pixels treated as occluded).
std::pair<data::StereoSample, Mask> apply_occluder(const data::StereoSample& sample, const OccluderPatch& patch);

/// Left pixels whose bilinear match (x - d, y) touches a pixel of `region`
/// (floor or ceil of x - d inside it). Masking these alongside the footprint
/// removes every cost that reads pasted right-view values.
Mask matches_into(const Mask& region, const Tensor& disparity);

/// draw_occluder + apply_occluder for a real-domain sample. Throws
/// ContractError for synthetic samples.
std::pair<data::StereoSample, Mask> add_synthetic_occluder(const data::StereoSample& sample, std::mt19937_64& rng,
                                                            OccluderSource source = OccluderSource::noise);

}  // namespace semistereo::occlusion
