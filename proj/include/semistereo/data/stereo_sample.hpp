#pragma once

#include <optional>
#include <string>

#include "semistereo/tensor.hpp"

namespace semistereo::data {

enum class Domain { synthetic, real };

std::string to_string(Domain d);
Domain parse_domain(const std::string& s);

/// Rectified stereo pair. Images are 3 x H x W in [0, 1]; disparity maps are
/// 1 x H x W in pixels, left-view convention: left (x, y) matches right (x - d, y).
struct StereoSample {
  std::string id;
  Tensor left;
  Tensor right;
  std::optional<Tensor> gt_disparity;
  std::optional<Mask> gt_valid;
  /// true = the left pixel is not visible in the right view.
  std::optional<Mask> gt_occlusion;
  /// Right-view disparity (right (x, y) matches left (x + d, y)); only used to
  /// derive occlusion when gt_occlusion is absent.
  std::optional<Tensor> gt_disparity_right;
  Domain domain = Domain::synthetic;

  int height() const { return left.height(); }
  int width() const { return left.width(); }

  /// Throws ShapeError / FormatError when a StereoSample invariant is broken.
  void validate() const;
};

/// Copy carrying only what a self-supervised update may look at.
StereoSample strip_labels(const StereoSample& sample);

}  // namespace semistereo::data
