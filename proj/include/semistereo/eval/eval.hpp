#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "semistereo/data/stereo_sample.hpp"
#include "semistereo/model/config.hpp"
#include "semistereo/model/parameters.hpp"

namespace semistereo::eval {

/// Mean |pred - gt| over valid pixels; no disparity-range filtering. Throws
/// InsufficientDataError when nothing is valid.
double epe(const Tensor& pred, const Tensor& gt, const Mask& valid);

struct SampleResult {
  std::string id;
  double epe = 0.0;
  std::size_t n_valid = 0;
};

struct EvalReport {
  std::vector<SampleResult> per_sample;
  /// Ids of samples left out because their valid mask was empty.
  std::vector<std::string> excluded;
  double aggregate_epe = 0.0;  // unweighted mean of per-sample EPE
  std::size_t n_samples = 0;
};

/// Unweighted mean of per-sample EPE. Throws InsufficientDataError when empty.
double aggregate(std::span<const SampleResult> results);

/// Full-resolution prediction: finest pyramid level upsampled to the input.
Tensor predict_disparity(const model::ParameterSet& params, const data::StereoSample& sample,
                         const model::ModelConfig& config);

/// Throws InsufficientDataError for an empty list (or when every sample is
/// excluded) and ContractError for a sample without ground truth.
EvalReport evaluate_dataset(const model::ParameterSet& params, std::span<const data::StereoSample> samples,
                            const model::ModelConfig& config);

/// CSV with header `id,epe,n_valid`.
void write_csv(const EvalReport& report, const std::filesystem::path& path);
/// Human readable summary.
std::string to_text(const EvalReport& report);

}  // namespace semistereo::eval
