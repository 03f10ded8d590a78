#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "semistereo/autograd.hpp"
#include "semistereo/model/config.hpp"
#include "semistereo/model/parameters.hpp"

namespace semistereo::model {

/// Feature maps at strides 2, 4, 8 (CHW each).
struct FeaturePyramid {
  std::array<Tensor, 3> levels;
};

/// Plain-value network outputs. Pyramids are ordered coarse to fine; the last
/// disparity map is the stride-2 prediction. Disparities are expressed in
/// pixels of their own scale.
struct NetworkOutput {
  std::vector<Tensor> disparity;
  std::vector<Tensor> occlusion_logits;
  FeaturePyramid features_left;
  FeaturePyramid features_right;
};

/// The same outputs as nodes of a tape, for differentiation.
struct NetworkGraph {
  std::vector<ag::Var> disparity;
  std::vector<ag::Var> occlusion_logits;
  std::array<ag::Var, 3> features_left;
  std::array<ag::Var, 3> features_right;

  NetworkOutput values() const;
};

/// Tape nodes for each parameter, aligned with the ParameterSet order.
struct BoundParameters {
  std::vector<std::pair<std::string, ag::Var>> vars;
  ag::Var at(const std::string& name) const;
};

BoundParameters bind(ag::Tape& tape, const ParameterSet& params, bool trainable);
/// Gradients reached at the bound parameters after tape.backward().
ParameterSet collect_gradients(const ag::Tape& tape, const BoundParameters& bound);

/// Fan-in scaled (He) normal initialisation; deterministic in (config, seed).
/// Disparity heads start at small positive predictions and occlusion heads
/// start confidently "visible".
ParameterSet init_params(const ModelConfig& config, std::uint64_t seed);

/// (height, width) of every disparity map, coarse to fine.
std::vector<std::pair<int, int>> output_shapes(int height, int width, const ModelConfig& config);

/// Throws ShapeError (with the padding needed) when height / width are not
/// multiples of the largest stride.
void check_input_size(int height, int width, const ModelConfig& config);

NetworkGraph forward(ag::Tape& tape, const BoundParameters& params, ag::Var left, ag::Var right,
                     const ModelConfig& config);
NetworkOutput forward(const ParameterSet& params, const Tensor& left, const Tensor& right,
                      const ModelConfig& config);

/// Bilinear upsampling of a disparity map to (height, width) with values
/// multiplied by the width ratio, so the result is in full-resolution pixels.
/// The size ratio must be the same integer along both axes.
Tensor upsample_to_full(const Tensor& disparity, int height, int width);
ag::Var upsample_to_full(ag::Var disparity, int height, int width);

/// Parameter file: container of kind "parameters" with the model config in
/// its metadata. Bit-exact round trip.
void save_parameters(const std::filesystem::path& path, const ParameterSet& params,
                     const ModelConfig& config);
std::pair<ParameterSet, ModelConfig> load_parameters(const std::filesystem::path& path);

}  // namespace semistereo::model
