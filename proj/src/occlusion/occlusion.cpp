#include "semistereo/occlusion/occlusion.hpp"

#include <algorithm>
#include <cmath>

#include "semistereo/error.hpp"
#include "semistereo/occlusion/occlusion.hpp"

namespace semistereo::occlusion {

Mask occlusion_from_disparity(const Tensor& d_left, const Tensor& d_right, double tol) {
  if (!d_left.same_shape(d_right) || d_left.rank() != 3 || d_left.channels() != 1)
    throw ShapeError("occlusion_from_disparity: disparity maps must both be 1xHxW");
  if (!(tol > 0.0)) throw ContractError("occlusion_from_disparity: tol must be positive");
  const int h = d_left.height(), w = d_left.width();
  Mask occ(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double target = x - d_left(0, y, x);
      if (target < 0.0) {
        occ.set(y, x, true);
        continue;
      }
      const int xr = std::min(static_cast<int>(std::lround(target)), w - 1);
      occ.set(y, x, std::abs(d_left(0, y, x) - d_right(0, y, xr)) > tol);
    }
  return occ;
}

Mask occlusion_target(const data::StereoSample& sample) {
  if (sample.gt_occlusion) return *sample.gt_occlusion;
  if (sample.gt_disparity && sample.gt_disparity_right)
    return occlusion_from_disparity(*sample.gt_disparity, *sample.gt_disparity_right);
  throw InsufficientDataError(sample.id + ": no occlusion map and no right disparity to derive one");
}

void OccluderPatch::validate(int height, int width) const {
  const int max_side = std::min(height, width) / 3;
  if (rect.w < 8 || rect.h < 8 || rect.w > max_side || rect.h > max_side)
    throw ContractError("occluder patch size must be in [8, min(H,W)/3]");
  if (rect.x < 0 || rect.y < 0 || rect.x + rect.w > width || rect.y + rect.h > height)
    throw ContractError("occluder patch outside the image");
  if (texture.rank() != 3 || texture.channels() != 3 || texture.height() != rect.h || texture.width() != rect.w)
    throw ContractError("occluder texture does not match its rect");
}

OccluderPatch draw_occluder(int height, int width, std::mt19937_64& rng, OccluderSource source, const Tensor* image) {
  const int max_side = std::min(height, width) / 3;
  if (max_side < 8) throw ContractError("image too small for an occluder patch (need min(H,W) >= 24)");
  std::uniform_int_distribution<int> side(8, max_side);
  OccluderPatch p;
  p.source = source;
  p.rect.w = side(rng);
  p.rect.h = side(rng);
  p.rect.x = std::uniform_int_distribution<int>(0, width - p.rect.w)(rng);
  p.rect.y = std::uniform_int_distribution<int>(0, height - p.rect.h)(rng);
  p.texture = Tensor::chw(3, p.rect.h, p.rect.w);
  if (source == OccluderSource::copied_from_image) {
    if (image == nullptr) throw ContractError("copied_from_image occluder needs a source image");
    const int sx = std::uniform_int_distribution<int>(0, width - p.rect.w)(rng);
    const int sy = std::uniform_int_distribution<int>(0, height - p.rect.h)(rng);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < p.rect.h; ++y)
        for (int x = 0; x < p.rect.w; ++x) p.texture(c, y, x) = (*image)(c, sy + y, sx + x);
  } else {
    std::uniform_int_distribution<int> level(0, 255);
    for (double& v : p.texture.values()) v = level(rng) / 255.0;
  }
  return p;
}

std::pair<data::StereoSample, Mask> apply_occluder(const data::StereoSample& sample, const OccluderPatch& patch) {
  const int h = sample.height(), w = sample.width();
  patch.validate(h, w);
  data::StereoSample out = sample;
  Mask footprint(h, w);
  const OccluderRect& r = patch.rect;
  for (int y = 0; y < r.h; ++y)
    for (int x = 0; x < r.w; ++x) {
      for (int c = 0; c < 3; ++c) out.right(c, r.y + y, r.x + x) = patch.texture(c, y, x);
      footprint.set(r.y + y, r.x + x, true);
    }
  return {std::move(out), std::move(footprint)};
}

Mask matches_into(const Mask& region, const Tensor& disparity) {
  const int h = region.height(), w = region.width();
  if (disparity.channels() != 1 || disparity.height() != h || disparity.width() != w)
    throw ContractError("matches_into: disparity must be 1 x H x W matching the region");
  Mask out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double sx = x - disparity(0, y, x);
      const int x0 = static_cast<int>(std::floor(sx)), x1 = static_cast<int>(std::ceil(sx));
      const bool hit = (x0 >= 0 && x0 < w && region(y, x0)) || (x1 >= 0 && x1 < w && region(y, x1));
      out.set(y, x, hit);
    }
  return out;
}

std::pair<data::StereoSample, Mask> add_synthetic_occluder(const data::StereoSample& sample, std::mt19937_64& rng,
                                                            OccluderSource source) {
  if (sample.domain != data::Domain::real) throw ContractError("synthetic occluders are only added to real samples");
  const OccluderPatch p = draw_occluder(sample.height(), sample.width(), rng, source, &sample.right);
  return apply_occluder(sample, p);
}

}  // namespace semistereo::occlusion
