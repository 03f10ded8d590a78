#include "semistereo/model/config.hpp"

#include "semistereo/error.hpp"

namespace semistereo::model {

std::string to_string(DisparityActivation a) {
  return a == DisparityActivation::relu ? "relu" : "softplus";
}

DisparityActivation parse_disparity_activation(const std::string& s) {
  if (s == "relu") return DisparityActivation::relu;
  if (s == "softplus") return DisparityActivation::softplus;
  throw ConfigError("unknown disparity_activation '" + s + "' (relu|softplus)");
}

void ModelConfig::validate() const {
  if (base_channels < 1) throw ConfigError("model: base_channels must be >= 1");
  if (max_displacement < 1) throw ConfigError("model: max_displacement must be >= 1");
  if (n_scales < 3 || n_scales > 10)
    throw ConfigError("model: n_scales must be in [3, 10] (features are tapped at strides 2, 4, 8)");
}

}  // namespace semistereo::model
