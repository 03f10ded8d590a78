#pragma once

// Direct loop implementations of the library's definitions. They share no
// code with the library beyond the tensor containers.

#include <algorithm>
#include <cmath>
#include <vector>

#include "semistereo/model/network.hpp"
#include "semistereo/reconstruction/losses.hpp"
#include "semistereo/tensor.hpp"

namespace testing_support {

using semistereo::Mask;
using semistereo::Tensor;

/// Linear sample of row y at sx; false when sx leaves [0, w-1].
inline bool sample_row(const Tensor& src, int c, int y, double sx, double& out) {
  const int w = src.width();
  if (sx < 0.0 || sx > w - 1) return false;
  const int x0 = static_cast<int>(std::floor(sx));
  const double t = sx - x0;
  const double a = src(c, y, x0);
  const double b = x0 + 1 < w ? src(c, y, x0 + 1) : a;
  out = (1.0 - t) * a + t * b;
  return true;
}

/// Nearest source index for destination index i when resampling src -> dst.
inline int nn_index(int i, int src, int dst) {
  const long r = std::lround((i + 0.5) * src / dst - 0.5);
  return static_cast<int>(std::clamp<long>(r, 0, src - 1));
}

/// vol(d, y, x) = mean_c l(c, y, x) * r(c, y, x - d), zero when x - d < 0.
inline Tensor correlate_oracle(const Tensor& l, const Tensor& r, int max_d) {
  const int c = l.channels(), h = l.height(), w = l.width();
  Tensor vol = Tensor::chw(max_d + 1, h, w, 0.0);
  for (int d = 0; d <= max_d; ++d)
    for (int y = 0; y < h; ++y)
      for (int x = d; x < w; ++x) {
        double s = 0.0;
        for (int ch = 0; ch < c; ++ch) s += l(ch, y, x) * r(ch, y, x - d);
        vol(d, y, x) = s / c;
      }
  return vol;
}

inline double epe_oracle(const Tensor& pred, const Tensor& gt, const Mask& valid) {
  double sum = 0.0;
  int n = 0;
  for (int y = 0; y < gt.height(); ++y)
    for (int x = 0; x < gt.width(); ++x)
      if (valid(y, x)) {
        sum += std::abs(pred(0, y, x) - gt(0, y, x));
        ++n;
      }
  return sum / n;
}

/// Per-level loop over the definitions: NN-resampled disparity and mask,
/// linear warp, dissimilarity, masked mean, mean over non-empty levels.
inline double dfr_oracle(const semistereo::model::FeaturePyramid& fl, const semistereo::model::FeaturePyramid& fr,
                         const Tensor& disp, const Mask& mask, semistereo::recon::FeatureMetric metric) {
  using semistereo::recon::FeatureMetric;
  double total = 0.0;
  int used = 0;
  for (int k = 0; k < 3; ++k) {
    const Tensor& a = fl.levels[k];
    const Tensor& b = fr.levels[k];
    const int c = a.channels(), h = a.height(), w = a.width();
    const double ratio = static_cast<double>(w) / disp.width();
    double sum = 0.0;
    int n = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!mask(nn_index(y, mask.height(), h), nn_index(x, mask.width(), w))) continue;
        const double d = disp(0, nn_index(y, disp.height(), h), nn_index(x, disp.width(), w)) * ratio;
        std::vector<double> wb(c);
        bool in = true;
        for (int ch = 0; ch < c; ++ch) in = sample_row(b, ch, y, x - d, wb[ch]) && in;
        if (!in) continue;
        double v = 0.0;
        if (metric == FeatureMetric::cosine) {
          double dot = 0, na = 0, nb = 0;
          for (int ch = 0; ch < c; ++ch) {
            dot += a(ch, y, x) * wb[ch];
            na += a(ch, y, x) * a(ch, y, x);
            nb += wb[ch] * wb[ch];
          }
          v = 1.0 - dot / (std::sqrt(na) * std::sqrt(nb) + 1e-8);
        } else if (metric == FeatureMetric::l1) {
          for (int ch = 0; ch < c; ++ch) v += std::abs(a(ch, y, x) - wb[ch]) / c;
        } else {
          for (int ch = 0; ch < c; ++ch) v += (a(ch, y, x) - wb[ch]) * (a(ch, y, x) - wb[ch]);
          v = std::sqrt(v);
        }
        sum += v;
        ++n;
      }
    if (n > 0) {
      total += sum / n;
      ++used;
    }
  }
  return total / used;
}

/// Forward projection of a left row: each right pixel keeps the largest
/// disparity claiming it; unclaimed right pixels take `background`.
inline std::vector<double> project_right(const std::vector<int>& dl, int background) {
  const int w = static_cast<int>(dl.size());
  std::vector<double> dr(w, -1.0);
  for (int x = 0; x < w; ++x) {
    const int xr = x - dl[x];
    if (xr >= 0) dr[xr] = std::max(dr[xr], static_cast<double>(dl[x]));
  }
  for (double& v : dr)
    if (v < 0) v = background;
  return dr;
}

/// A left pixel is occluded when its match leaves the frame or a pixel with
/// larger disparity claims the same right pixel.
inline std::vector<bool> forward_projection_oracle(const std::vector<int>& dl) {
  const int w = static_cast<int>(dl.size());
  std::vector<bool> occ(w, false);
  for (int x = 0; x < w; ++x) {
    const int xr = x - dl[x];
    if (xr < 0) {
      occ[x] = true;
      continue;
    }
    for (int o = 0; o < w; ++o)
      if (o != x && o - dl[o] == xr && dl[o] > dl[x]) occ[x] = true;
  }
  return occ;
}

/// Random layered row over `levels`: background plus three segments.
template <class Rng>
std::vector<int> random_layered_row(Rng& rng, const std::vector<int>& levels) {
  const int w = std::uniform_int_distribution<int>(12, 40)(rng);
  std::vector<int> dl(w, levels[0]);
  for (int seg = 0; seg < 3; ++seg) {
    const int a = std::uniform_int_distribution<int>(0, w - 1)(rng);
    const int len = std::uniform_int_distribution<int>(2, 8)(rng);
    const int lv = levels[std::uniform_int_distribution<std::size_t>(0, levels.size() - 1)(rng)];
    for (int x = a; x < std::min(w, a + len); ++x) dl[x] = std::max(dl[x], lv);
  }
  return dl;
}

inline Tensor row_map(const std::vector<double>& row) {
  Tensor t = Tensor::chw(1, 1, static_cast<int>(row.size()));
  for (std::size_t i = 0; i < row.size(); ++i) t[i] = row[i];
  return t;
}

}  // namespace testing_support
