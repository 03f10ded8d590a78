#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semistereo/autograd.hpp"
#include "semistereo/model/network.hpp"

namespace semistereo::recon {

inline constexpr double kSsimAlpha = 0.85;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;
inline constexpr double kCosineEpsilon = 1e-8;

enum class FeatureMetric { cosine, l1, l2 };

std::string to_string(FeatureMetric m);
FeatureMetric parse_feature_metric(const std::string& s);

/// Loss value on a tape plus the per-scale breakdown (coarse to fine) and the
/// number of pixels averaged at each scale.
struct ScaledLoss {
  ag::Var value;
  std::vector<double> per_scale;
  std::vector<std::size_t> n_valid;
};

/// Per-pixel view-reconstruction cost, 1 x H x W:
///   mean_c [ alpha * clamp((1 - SSIM_3x3) / 2, 0, 1) + (1 - alpha) * |left - warped| ]
/// SSIM window statistics only pool pixels set in `valid`, so values at
/// unset pixels never influence the cost. Zero outside `valid`.
ag::Var photometric_cost_map(ag::Var left, ag::Var warped, const Mask& valid);

/// Mean photometric cost of left vs. right warped by a full-resolution
/// disparity, over mask AND in-bounds. Throws DegenerateBatchError when that
/// set is empty.
ScaledLoss photometric_loss(ag::Var left, ag::Var right, ag::Var disparity, const Mask& mask);
double photometric_loss(const Tensor& left, const Tensor& right, const Tensor& disparity, const Mask& mask);

/// Per-pixel dissimilarity of two C x H x W feature maps, 1 x H x W.
/// cosine: 1 - <a, b> / (|a| |b| + eps) in [0, 2]; l1: mean |a - b| over
/// channels; l2: |a - b| (euclidean).
ag::Var feature_dissimilarity(ag::Var a, ag::Var b, FeatureMetric metric);

/// Deep-feature reconstruction loss over the three feature-tap levels. The
/// finest disparity prediction is resampled (nearest neighbour) to each
/// level, right features are warped with it and compared to the left ones;
/// the occlusion mask (full resolution) is resampled the same way. The
/// result is the mean over levels whose mask is non-empty (normally all
/// three); throws DegenerateBatchError when all levels are empty.
ScaledLoss dfr_loss(std::span<const ag::Var, 3> features_left, std::span<const ag::Var, 3> features_right,
                    ag::Var finest_disparity, const Mask& occlusion_mask, FeatureMetric metric);
double dfr_loss(const model::FeaturePyramid& features_left, const model::FeaturePyramid& features_right,
                const Tensor& finest_disparity, const Mask& occlusion_mask, FeatureMetric metric);

/// Per-scale weights, coarse to fine: the finest scale gets 1/2, the next
/// 1/4, ..., and the two coarsest share the remainder, so they sum to 1.
/// For six scales: {1/32, 1/32, 1/16, 1/8, 1/4, 1/2}.
std::vector<double> scale_weights(int n_scales);

/// sum_s w_s * mean_valid |pred_s - gt_s|, with gt and validity downsampled
/// to each scale by nearest neighbour. Scales left without valid pixels are
/// skipped; an all-invalid gt throws DegenerateBatchError.
ScaledLoss supervised_disparity_loss(std::span<const ag::Var> disparity_pyramid, const Tensor& gt_disparity,
                                     const Mask& gt_valid);

/// sum_s w_s * mean_mask BCE(sigmoid(logits_s), occluded_s); occluded = 1.
ScaledLoss occlusion_loss(std::span<const ag::Var> occlusion_logits, const Mask& gt_occlusion,
                          const Mask& supervision_mask);

/// Upsamples finest-scale logits to (height, width) bilinearly and returns
/// sigmoid(logit) < threshold, i.e. true where the pixel is predicted visible.
Mask mask_from_occlusion(const Tensor& occlusion_logits, int height, int width, double threshold);

/// Named loss components of one update with their weights. total is the
/// weighted sum accumulated in component order.
struct LossReport {
  std::vector<std::pair<std::string, double>> components;
  std::vector<std::pair<std::string, double>> weights;
  std::map<std::string, std::vector<double>> per_scale;
  std::map<std::string, std::size_t> n_valid_pixels;
  double total = 0.0;
  bool skipped = false;
  std::string skip_reason;

  void add(const std::string& name, double value, double weight);
  bool has(const std::string& name) const;
  double component(const std::string& name) const;
  /// Recomputes total = sum_i weight_i * component_i in insertion order.
  double weighted_total() const;
};

}  // namespace semistereo::recon
