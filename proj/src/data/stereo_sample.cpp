#include "semistereo/data/stereo_sample.hpp"

#include <cmath>

#include "semistereo/error.hpp"

namespace semistereo::data {

std::string to_string(Domain d) { return d == Domain::synthetic ? "synthetic" : "real"; }

Domain parse_domain(const std::string& s) {
  if (s == "synthetic") return Domain::synthetic;
  if (s == "real") return Domain::real;
  throw FormatError("unknown domain '" + s + "'");
}

void StereoSample::validate() const {
  if (left.rank() != 3 || left.channels() != 3) throw ShapeError(id + ": left image must be 3xHxW");
  if (!left.same_shape(right)) throw ShapeError(id + ": left/right shape mismatch");
  for (const Tensor* img : {&left, &right})
    for (double v : img->values())
      if (!(v >= 0.0 && v <= 1.0)) throw FormatError(id + ": image value outside [0,1]");
  const int h = height(), w = width();
  auto check_map = [&](const Tensor& m, const char* what) {
    if (m.rank() != 3 || m.channels() != 1 || m.height() != h || m.width() != w)
      throw ShapeError(id + ": " + what + " shape mismatch");
  };
  auto check_mask = [&](const Mask& m, const char* what) {
    if (m.height() != h || m.width() != w) throw ShapeError(id + ": " + what + " shape mismatch");
  };
  if (gt_disparity) {
    check_map(*gt_disparity, "gt_disparity");
    for (std::size_t i = 0; i < gt_disparity->size(); ++i) {
      const bool valid = !gt_valid || (*gt_valid)[i];
      const double d = (*gt_disparity)[i];
      if (valid && !(std::isfinite(d) && d >= 0.0))
        throw FormatError(id + ": invalid ground-truth disparity");
    }
  }
  if (gt_valid) check_mask(*gt_valid, "gt_valid");
  if (gt_occlusion) check_mask(*gt_occlusion, "gt_occlusion");
  if (gt_disparity_right) check_map(*gt_disparity_right, "gt_disparity_right");
}

StereoSample strip_labels(const StereoSample& sample) {
  StereoSample out;
  out.id = sample.id;
  out.left = sample.left;
  out.right = sample.right;
  out.domain = sample.domain;
  return out;
}

}  // namespace semistereo::data
