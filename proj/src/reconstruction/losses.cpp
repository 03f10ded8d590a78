#include "semistereo/reconstruction/losses.hpp"

#include <cmath>

#include "semistereo/error.hpp"
#include "semistereo/reconstruction/warp.hpp"

namespace semistereo::recon {

std::string to_string(FeatureMetric m) {
  switch (m) {
    case FeatureMetric::cosine: return "cosine";
    case FeatureMetric::l1: return "l1";
    case FeatureMetric::l2: return "l2";
  }
  return "cosine";
}

FeatureMetric parse_feature_metric(const std::string& s) {
  if (s == "cosine") return FeatureMetric::cosine;
  if (s == "l1") return FeatureMetric::l1;
  if (s == "l2") return FeatureMetric::l2;
  throw ConfigError("unknown feature metric '" + s + "' (cosine|l1|l2)");
}

ag::Var photometric_cost_map(ag::Var left, ag::Var warped, const Mask& valid) {
  using namespace ag;
  auto pool = [&](Var v) { return masked_box3(v, valid); };
  const Var mu_l = pool(left);
  const Var mu_w = pool(warped);
  const Var var_l = sub(pool(mul(left, left)), mul(mu_l, mu_l));
  const Var var_w = sub(pool(mul(warped, warped)), mul(mu_w, mu_w));
  const Var cov = sub(pool(mul(left, warped)), mul(mu_l, mu_w));
  const Var num = mul(affine(mul(mu_l, mu_w), 2.0, kSsimC1), affine(cov, 2.0, kSsimC2));
  const Var den = mul(affine(add(mul(mu_l, mu_l), mul(mu_w, mu_w)), 1.0, kSsimC1),
                      affine(add(var_l, var_w), 1.0, kSsimC2));
  const Var dssim = clamp(affine(div(num, den), -0.5, 0.5), 0.0, 1.0);
  const Var l1 = abs(sub(left, warped));
  Var cost = channel_mean(add(affine(dssim, kSsimAlpha), affine(l1, 1.0 - kSsimAlpha)));
  // Zero outside the valid set so the map is directly usable for reporting.
  Tensor keep = Tensor::chw(1, valid.height(), valid.width());
  for (std::size_t i = 0; i < valid.size(); ++i) keep[i] = valid[i] ? 1.0 : 0.0;
  return mul(cost, left.tape->constant(std::move(keep)));
}

ScaledLoss photometric_loss(ag::Var left, ag::Var right, ag::Var disparity, const Mask& mask) {
  WarpResult w = warp_right_to_left(right, disparity);
  const Mask valid = mask & w.inbounds;
  if (!valid.any()) throw DegenerateBatchError("photometric loss: no unmasked in-bounds pixel");
  ag::Var cost = photometric_cost_map(left, w.warped, valid);
  ag::Var loss = ag::masked_mean(cost, valid);
  return {loss, {loss.value().item()}, {valid.count()}};
}

double photometric_loss(const Tensor& left, const Tensor& right, const Tensor& disparity, const Mask& mask) {
  ag::Tape tape;
  return photometric_loss(tape.constant(left), tape.constant(right), tape.constant(disparity), mask)
      .value.value()
      .item();
}

ag::Var feature_dissimilarity(ag::Var a, ag::Var b, FeatureMetric metric) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 3 || !av.same_shape(bv)) throw ShapeError("feature_dissimilarity: shape mismatch");
  const int c = av.channels(), h = av.height(), w = av.width();
  Tensor out = Tensor::chw(1, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = 0.0;
      switch (metric) {
        case FeatureMetric::cosine: {
          double dot = 0.0, na = 0.0, nb = 0.0;
          for (int k = 0; k < c; ++k) {
            dot += av(k, y, x) * bv(k, y, x);
            na += av(k, y, x) * av(k, y, x);
            nb += bv(k, y, x) * bv(k, y, x);
          }
          v = 1.0 - dot / (std::sqrt(na) * std::sqrt(nb) + kCosineEpsilon);
          break;
        }
        case FeatureMetric::l1:
          for (int k = 0; k < c; ++k) v += std::abs(av(k, y, x) - bv(k, y, x));
          v /= c;
          break;
        case FeatureMetric::l2:
          for (int k = 0; k < c; ++k) v += (av(k, y, x) - bv(k, y, x)) * (av(k, y, x) - bv(k, y, x));
          v = std::sqrt(v);
          break;
      }
      out(0, y, x) = v;
    }
  return a.tape->record(std::move(out), {a, b}, [a, b, metric](ag::Tape& t, const Tensor& g) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    const int c = av.channels(), h = av.height(), w = av.width();
    const bool ga = t.requires_grad(a), gb = t.requires_grad(b);
    Tensor* da = ga ? &t.grad_buffer(a) : nullptr;
    Tensor* db = gb ? &t.grad_buffer(b) : nullptr;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double gv = g(0, y, x);
        if (gv == 0.0) continue;
        switch (metric) {
          case FeatureMetric::cosine: {
            double dot = 0.0, na2 = 0.0, nb2 = 0.0;
            for (int k = 0; k < c; ++k) {
              dot += av(k, y, x) * bv(k, y, x);
              na2 += av(k, y, x) * av(k, y, x);
              nb2 += bv(k, y, x) * bv(k, y, x);
            }
            const double na = std::sqrt(na2), nb = std::sqrt(nb2);
            const double den = na * nb + kCosineEpsilon;
            // delta = 1 - dot / den, d(den)/da = nb * a / na
            const double sa = na > 0.0 ? dot * nb / (na * den * den) : 0.0;
            const double sb = nb > 0.0 ? dot * na / (nb * den * den) : 0.0;
            for (int k = 0; k < c; ++k) {
              if (ga) (*da)(k, y, x) += gv * (-bv(k, y, x) / den + sa * av(k, y, x));
              if (gb) (*db)(k, y, x) += gv * (-av(k, y, x) / den + sb * bv(k, y, x));
            }
            break;
          }
          case FeatureMetric::l1:
            for (int k = 0; k < c; ++k) {
              const double diff = av(k, y, x) - bv(k, y, x);
              const double s = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) / c;
              if (ga) (*da)(k, y, x) += gv * s;
              if (gb) (*db)(k, y, x) -= gv * s;
            }
            break;
          case FeatureMetric::l2: {
            double n2 = 0.0;
            for (int k = 0; k < c; ++k) n2 += (av(k, y, x) - bv(k, y, x)) * (av(k, y, x) - bv(k, y, x));
            const double n = std::sqrt(n2);
            if (n == 0.0) break;
            for (int k = 0; k < c; ++k) {
              const double s = (av(k, y, x) - bv(k, y, x)) / n;
              if (ga) (*da)(k, y, x) += gv * s;
              if (gb) (*db)(k, y, x) -= gv * s;
            }
            break;
          }
        }
      }
  });
}

ScaledLoss dfr_loss(std::span<const ag::Var, 3> features_left, std::span<const ag::Var, 3> features_right,
                    ag::Var finest_disparity, const Mask& occlusion_mask, FeatureMetric metric) {
  ScaledLoss out;
  std::vector<ag::Var> levels;
  for (std::size_t k = 0; k < 3; ++k) {
    const Tensor& f = features_left[k].value();
    if (!f.same_shape(features_right[k].value())) throw ShapeError("dfr_loss: left/right feature shapes differ");
    const int h = f.height(), w = f.width();
    ag::Var disp = resample_disparity_nn(finest_disparity, h, w);
    WarpResult warp = warp_right_to_left(features_right[k], disp);
    const Mask valid = resample_mask_nn(occlusion_mask, h, w) & warp.inbounds;
    out.n_valid.push_back(valid.count());
    if (!valid.any()) {
      out.per_scale.push_back(0.0);
      continue;
    }
    ag::Var level = ag::masked_mean(feature_dissimilarity(features_left[k], warp.warped, metric), valid);
    out.per_scale.push_back(level.value().item());
    levels.push_back(level);
  }
  if (levels.empty()) throw DegenerateBatchError("dfr loss: every feature level is fully masked");
  std::vector<std::pair<ag::Var, double>> terms;
  for (const ag::Var& v : levels) terms.emplace_back(v, 1.0 / static_cast<double>(levels.size()));
  out.value = ag::weighted_sum(terms);
  return out;
}

double dfr_loss(const model::FeaturePyramid& features_left, const model::FeaturePyramid& features_right,
                const Tensor& finest_disparity, const Mask& occlusion_mask, FeatureMetric metric) {
  ag::Tape tape;
  std::array<ag::Var, 3> l, r;
  for (int k = 0; k < 3; ++k) {
    l[k] = tape.constant(features_left.levels[k]);
    r[k] = tape.constant(features_right.levels[k]);
  }
  return dfr_loss(l, r, tape.constant(finest_disparity), occlusion_mask, metric).value.value().item();
}

std::vector<double> scale_weights(int n_scales) {
  if (n_scales < 1) throw ContractError("scale_weights: need at least one scale");
  std::vector<double> w(static_cast<std::size_t>(n_scales));
  // index 0 = coarsest
  for (int k = 0; k < n_scales - 1; ++k) w[n_scales - 1 - k] = std::ldexp(1.0, -(k + 1));
  w[0] = n_scales == 1 ? 1.0 : std::ldexp(1.0, -(n_scales - 1));
  return w;
}

ScaledLoss supervised_disparity_loss(std::span<const ag::Var> disparity_pyramid, const Tensor& gt_disparity,
                                     const Mask& gt_valid) {
  if (!gt_valid.any()) throw DegenerateBatchError("supervised loss: no valid ground-truth pixel");
  const auto weights = scale_weights(static_cast<int>(disparity_pyramid.size()));
  ag::Tape& tape = *disparity_pyramid[0].tape;
  ScaledLoss out;
  std::vector<std::pair<ag::Var, double>> terms;
  for (std::size_t s = 0; s < disparity_pyramid.size(); ++s) {
    const Tensor& pred = disparity_pyramid[s].value();
    const int h = pred.height(), w = pred.width();
    const Mask valid = resample_mask_nn(gt_valid, h, w);
    out.n_valid.push_back(valid.count());
    if (!valid.any()) {
      out.per_scale.push_back(0.0);
      continue;
    }
    ag::Var gt = tape.constant(resample_disparity_nn(gt_disparity, h, w));
    ag::Var l = ag::masked_mean(ag::abs(ag::sub(disparity_pyramid[s], gt)), valid);
    out.per_scale.push_back(l.value().item());
    terms.emplace_back(l, weights[s]);
  }
  if (terms.empty()) throw DegenerateBatchError("supervised loss: no scale samples a valid pixel");
  out.value = ag::weighted_sum(terms);
  return out;
}

ScaledLoss occlusion_loss(std::span<const ag::Var> occlusion_logits, const Mask& gt_occlusion,
                          const Mask& supervision_mask) {
  if (!supervision_mask.any()) throw DegenerateBatchError("occlusion loss: empty supervision mask");
  const auto weights = scale_weights(static_cast<int>(occlusion_logits.size()));
  ScaledLoss out;
  std::vector<std::pair<ag::Var, double>> terms;
  for (std::size_t s = 0; s < occlusion_logits.size(); ++s) {
    const Tensor& z = occlusion_logits[s].value();
    const int h = z.height(), w = z.width();
    const Mask mask = resample_mask_nn(supervision_mask, h, w);
    out.n_valid.push_back(mask.count());
    if (!mask.any()) {
      out.per_scale.push_back(0.0);
      continue;
    }
    const Mask target = resample_mask_nn(gt_occlusion, h, w);
    ag::Var l = ag::masked_mean(ag::bce_with_logits(occlusion_logits[s], target), mask);
    out.per_scale.push_back(l.value().item());
    terms.emplace_back(l, weights[s]);
  }
  if (terms.empty()) throw DegenerateBatchError("occlusion loss: no scale samples a supervised pixel");
  out.value = ag::weighted_sum(terms);
  return out;
}

Mask mask_from_occlusion(const Tensor& occlusion_logits, int height, int width, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ContractError("occlusion threshold must be in (0, 1)");
  ag::Tape tape;
  const Tensor up = ag::upsample_bilinear(tape.constant(occlusion_logits), height, width, 1.0).value();
  Mask visible(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double p = 1.0 / (1.0 + std::exp(-up(0, y, x)));
      visible.set(y, x, p < threshold);
    }
  return visible;
}

void LossReport::add(const std::string& name, double value, double weight) {
  components.emplace_back(name, value);
  weights.emplace_back(name, weight);
  total = weighted_total();
}

bool LossReport::has(const std::string& name) const {
  for (const auto& c : components)
    if (c.first == name) return true;
  return false;
}

double LossReport::component(const std::string& name) const {
  for (const auto& c : components)
    if (c.first == name) return c.second;
  throw ContractError("loss report has no component " + name);
}

double LossReport::weighted_total() const {
  double t = 0.0;
  for (std::size_t i = 0; i < components.size(); ++i) t += weights[i].second * components[i].second;
  return t;
}

}  // namespace semistereo::recon
