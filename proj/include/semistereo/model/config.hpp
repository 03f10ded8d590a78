#pragma once

#include <array>
#include <string>

namespace semistereo::model {

enum class DisparityActivation { relu, softplus };

std::string to_string(DisparityActivation a);
DisparityActivation parse_disparity_activation(const std::string& s);

/// DispNet-C style network hyper-parameters. Output strides are
/// 2^n_scales (coarsest) down to 2 (finest); features are tapped from the
/// three siamese tower levels at strides 2, 4 and 8 and correlated at stride 8.
struct ModelConfig {
  int base_channels = 8;
  /// One-sided search range of the correlation, in stride-8 pixels.
  int max_displacement = 40;
  int n_scales = 6;
  DisparityActivation disparity_activation = DisparityActivation::relu;

  static constexpr std::array<int, 3> feature_tap_strides{2, 4, 8};

  int largest_stride() const { return 1 << n_scales; }
  /// Throws ConfigError.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace semistereo::model
