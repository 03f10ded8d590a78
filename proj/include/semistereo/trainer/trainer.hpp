#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "semistereo/data/schedule.hpp"
#include "semistereo/data/stereo_sample.hpp"
#include "semistereo/model/parameters.hpp"
#include "semistereo/reconstruction/losses.hpp"
#include "semistereo/trainer/config.hpp"

namespace semistereo::trainer {

struct AdamState {
  model::ParameterSet m;
  model::ParameterSet v;
  std::int64_t t = 0;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Everything an update reads or writes. The rng drives occluder
/// augmentation only.
struct TrainState {
  model::ParameterSet params;
  AdamState adam;
  std::int64_t step = 0;
  int epoch = 0;
  std::mt19937_64 rng;

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

TrainState initial_state(const TrainConfig& config);

/// One Adam update with global-norm gradient clipping. Returns the gradient
/// norm before clipping.
double adam_update(model::ParameterSet& params, AdamState& adam, const model::ParameterSet& grads,
                   const OptimizerConfig& opt);

/// Supervised update on synthetic samples:
///   supervised_weight * supervised_disparity_loss + occlusion_weight * occlusion_loss.
/// A degenerate batch leaves the parameters untouched and returns a report
/// flagged `skipped`; the step counter advances either way.
recon::LossReport train_step_supervised(TrainState& state, std::span<const data::StereoSample> batch,
                                        const TrainConfig& config);

/// Self-supervised update on real samples. Labels are stripped before use, so
/// the update depends only on the images and the augmentation rng.
recon::LossReport train_step_selfsup(TrainState& state, std::span<const data::StereoSample> batch,
                                     const TrainConfig& config);

struct StepRecord {
  std::int64_t step = 0;  // 1-based index of the update
  int epoch = 0;
  data::BatchTag tag = data::BatchTag::supervised;
  std::vector<std::string> sample_ids;
  recon::LossReport report;
  /// Mean per-channel variance of the left feature maps at strides 2, 4, 8.
  std::array<double, 3> feature_variance{};
  double grad_norm = 0.0;
};

/// One JSON object per line.
std::string to_json_line(const StepRecord& record);

struct CheckpointRecord {
  TrainState state;
  TrainConfig config;
};

inline constexpr int kCheckpointVersion = 1;

/// Container of kind "checkpoint": parameters, Adam moments, counters, rng
/// state and the config echo. Throws VersionError on a version mismatch.
void save_checkpoint(const CheckpointRecord& record, const std::filesystem::path& path);
CheckpointRecord load_checkpoint(const std::filesystem::path& path);

struct RunOptions {
  /// Continue from this record instead of a fresh initialisation.
  std::optional<CheckpointRecord> resume;
  /// When set, checkpoints (ckpt_<step>.bin, final.bin) and log.jsonl go here.
  std::optional<std::filesystem::path> out_dir;
  std::function<void(const StepRecord&)> on_step;
};

struct RunResult {
  CheckpointRecord final;
  std::vector<StepRecord> log;
  std::vector<std::filesystem::path> artifacts;
};

/// Number of updates in each epoch for the given pools.
int steps_per_epoch(const TrainConfig& config, int n_synthetic, int n_real);

/// Alternating semi-supervised training. Each epoch draws steps_per_epoch / 2
/// samples per batch slot from both pools (seeded subsampling of the larger
/// pool), builds schedule_epoch over them and runs it in order.
RunResult run_training(const TrainConfig& config, std::span<const data::StereoSample> synthetic_pool,
                       std::span<const data::StereoSample> real_pool, const RunOptions& options = {});

/// Supervised-only baseline: every update is an S batch, same epoch length
/// and sample order as the S slots of run_training.
RunResult run_supervised(const TrainConfig& config, std::span<const data::StereoSample> synthetic_pool,
                         const RunOptions& options = {});

}  // namespace semistereo::trainer
