#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semistereo/data/stereo_sample.hpp"

namespace semistereo::data {

enum class Texture { noise, gradient, checker };

std::string to_string(Texture t);
Texture parse_texture(const std::string& s);

/// Procedural stereo scene made of fronto-parallel textured rectangles.
/// Layer 0 is a background spanning the whole frame (and beyond, so the
/// right view never runs out of texture). Visibility is resolved by
/// disparity: larger = nearer; equal disparities fall back to layer order.
struct ToySceneSpec {
  int width = 128;
  int height = 64;
  int n_layers = 2;
  int d_min = 2;
  int d_max = 14;
  Texture texture = Texture::noise;
  int texture_scale = 1;
  /// Optional explicit integer disparity per layer (size n_layers).
  std::vector<int> layer_disparities;

  void validate() const;
};

/// Renders a synthetic-domain sample with exact integer disparity, right-view
/// disparity and occlusion ground truth. Pure function of (spec, seed).
/// Pixel values are multiples of 1/255, so 8-bit PNG storage is lossless.
StereoSample generate_toy_pair(const ToySceneSpec& spec, std::uint64_t seed);

}  // namespace semistereo::data
