#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "semistereo/model/config.hpp"
#include "semistereo/reconstruction/losses.hpp"

namespace semistereo::trainer {

enum class LossMode { PH, DFR };
enum class LrSchedule { constant, cosine };
std::string to_string(LossMode m);
LossMode parse_loss_mode(const std::string& s);
std::string to_string(LrSchedule s);
LrSchedule parse_lr_schedule(const std::string& s);

struct OptimizerConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip_norm = 10.0;  // global L2 norm; 0 disables clipping
  /// cosine anneals learning_rate to 0 over the n_epochs of a run.
  LrSchedule lr_schedule = LrSchedule::constant;

  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

/// Full description of one training run.
struct TrainConfig {
  LossMode loss_mode = LossMode::PH;
  recon::FeatureMetric dfr_metric = recon::FeatureMetric::cosine;
  bool dfr_stop_gradient_features = false;
  double occlusion_threshold = 0.5;
  bool occluder_augmentation = true;
  double supervised_weight = 1.0;
  double selfsup_weight = 1.0;
  double occlusion_weight = 0.1;
  OptimizerConfig optimizer;
  /// Updates per epoch (S and R batches together). 0 = one pass over the
  /// smaller pool.
  int steps_per_epoch = 0;
  int n_epochs = 1;
  int batch_size = 1;
  model::ModelConfig model;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // 0 = only the final checkpoint
  bool deterministic = true;

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Flat `key = value` text, one entry per line, keys named after the
/// TrainConfig fields (`optimizer.learning_rate`, `model.base_channels`, ...).
/// '#' starts a comment. Unknown keys, duplicates and malformed values are
/// ConfigErrors.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::filesystem::path& path);
/// Canonical text form; parse_train_config(format_train_config(c)) == c.
std::string format_train_config(const TrainConfig& config);

/// Learning rate for update `step` (0-based) of a run with `total` updates.
double learning_rate_at(const OptimizerConfig& opt, std::int64_t step, std::int64_t total);

/// True when STEREO_SEMISUP_DETERMINISTIC=1 is set in the environment.
bool deterministic_from_environment();

}  // namespace semistereo::trainer
