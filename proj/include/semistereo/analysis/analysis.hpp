#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "semistereo/data/stereo_sample.hpp"
#include "semistereo/model/config.hpp"
#include "semistereo/model/network.hpp"
#include "semistereo/model/parameters.hpp"

namespace semistereo::analysis {

enum class CostMetric { photometric, cosine, l1, l2 };
std::string to_string(CostMetric m);
CostMetric parse_cost_metric(const std::string& s);

struct Pixel {
  int x = 0;
  int y = 0;
};

/// Matching cost of one left-view pixel for every integer candidate
/// disparity 0..D (full-resolution pixels).
struct CostCurve {
  std::string sample_id;
  Pixel pixel;
  CostMetric metric = CostMetric::photometric;
  int level = 1;  // stride the costs were computed at
  std::vector<int> candidates;
  std::vector<double> costs;
  /// Candidates whose support leaves the frame; their cost is replaced by the
  /// largest in-frame cost of the curve.
  std::vector<bool> out_of_frame;
};

struct CurveStats {
  int argmin_disparity = 0;
  std::optional<double> cost_at_gt;
  double entropy = 0.0;
  int basin_width = 0;
  std::optional<double> gt_disparity;
};

struct CurveOptions {
  int patch_radius = 1;  // photometric patch is (2r+1)^2
  int level = 2;         // feature-tap stride for feature metrics: 2, 4 or 8
};

inline constexpr double kDefaultTemperature = 0.1;

/// Photometric curve: cost(d) = mean over the patch around the pixel of the
/// per-pixel SSIM + L1 training cost between left and right shifted by d.
CostCurve photometric_curve(const data::StereoSample& sample, Pixel pixel, int max_disparity,
                            const CurveOptions& options = {});

/// Feature curve from explicit pyramids: the pixel maps to (round(x / s),
/// round(y / s)) at stride s and the right feature is interpolated linearly
/// at the shift d / s.
CostCurve feature_curve(const model::FeaturePyramid& left, const model::FeaturePyramid& right, Pixel pixel,
                        int width, int height, int max_disparity, CostMetric metric, const CurveOptions& options = {});

/// Runs the network for feature metrics; params are ignored for photometric.
/// Throws ContractError for max_disparity >= width or a pixel outside the image.
CostCurve cost_curve(const data::StereoSample& sample, const model::ParameterSet* params,
                     const model::ModelConfig* config, Pixel pixel, int max_disparity, CostMetric metric,
                     const CurveOptions& options = {});

/// Shannon entropy (nats) of softmax(-c / tau) over min-max normalised costs;
/// a constant curve normalises to all zeros (entropy ln N).
double curve_entropy(std::span<const double> costs, double temperature = kDefaultTemperature);

/// Width of the maximal run of candidates around the (first) global minimum
/// on which costs do not increase toward it from either side.
int basin_width(std::span<const double> costs);

/// Curve cost at a fractional disparity by linear interpolation between
/// candidates; nullopt outside the candidate range.
std::optional<double> cost_at(const CostCurve& curve, double disparity);

CurveStats curve_stats(const CostCurve& curve, std::optional<double> gt_disparity,
                       double temperature = kDefaultTemperature);

struct InflationResult {
  double ratio = 0.0;
  double mean_near = 0.0;
  double mean_far = 0.0;
  std::size_t n_near_candidates = 0;
  std::size_t n_far_candidates = 0;
};

/// Added to both means of the inflation ratio so scenes whose far-from-edge
/// cost is exactly zero still give a finite ratio.
inline constexpr double kInflationEpsilon = 1e-6;

/// Cost at the ground-truth disparity near gt edges (|grad gt| > 1, within
/// `band` pixels) relative to far from them (> 4 band), over n_pixels
/// non-occluded pixels drawn from each stratum:
///   (mean_near + eps) / (mean_far + eps).
/// Throws InsufficientDataError when a stratum has fewer than n_pixels.
InflationResult boundary_cost_inflation(const data::StereoSample& sample, const model::ParameterSet* params,
                                        const model::ModelConfig* config, CostMetric metric, int band, int n_pixels,
                                        std::mt19937_64& rng, const CurveOptions& options = {});

/// Writes curves.csv, stats.csv and one overlay plot per (sample, pixel):
/// plot_<sample>_<x>_<y>.png. curves and stats are parallel lists. Returns
/// the written paths.
std::vector<std::filesystem::path> emit_report(std::span<const CostCurve> curves, std::span<const CurveStats> stats,
                                               const std::filesystem::path& out_dir);

}  // namespace semistereo::analysis
