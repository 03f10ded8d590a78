#include "semistereo/reconstruction/warp.hpp"

#include <cmath>

#include "semistereo/error.hpp"

namespace semistereo::recon {

namespace {

struct Sample {
  int x0, x1;
  double frac;
};

}  // namespace

WarpResult warp_right_to_left(ag::Var source, ag::Var disparity) {
  const Tensor& s = source.value();
  const Tensor& d = disparity.value();
  if (s.rank() != 3 || d.rank() != 3 || d.channels() != 1 || d.height() != s.height() || d.width() != s.width())
    throw ShapeError("warp: disparity " + d.shape_string() + " does not match source " + s.shape_string());
  const int c = s.channels(), h = s.height(), w = s.width();

  std::vector<Sample> taps(static_cast<std::size_t>(h) * w);
  Mask inbounds(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double dv = d(0, y, x);
      if (!(dv >= 0.0) || !std::isfinite(dv)) throw ContractError("warp: disparity must be finite and >= 0");
      const double xs = x - dv;
      if (xs < 0.0 || xs > w - 1) continue;
      inbounds.set(y, x, true);
      const int x0 = static_cast<int>(std::floor(xs));
      taps[static_cast<std::size_t>(y) * w + x] = {x0, std::min(x0 + 1, w - 1), xs - x0};
    }

  Tensor out = Tensor::chw(c, h, w);
  for (int k = 0; k < c; ++k)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!inbounds(y, x)) continue;
        const Sample& t = taps[static_cast<std::size_t>(y) * w + x];
        const double a = s(k, y, t.x0), b = s(k, y, t.x1);
        out(k, y, x) = a + t.frac * (b - a);
      }

  ag::Var warped = source.tape->record(
      std::move(out), {source, disparity}, [source, disparity, taps, inbounds](ag::Tape& tp, const Tensor& g) {
        const Tensor& s = tp.value(source);
        const int c = s.channels(), h = s.height(), w = s.width();
        const bool gs = tp.requires_grad(source), gd = tp.requires_grad(disparity);
        Tensor* ds = gs ? &tp.grad_buffer(source) : nullptr;
        Tensor* dd = gd ? &tp.grad_buffer(disparity) : nullptr;
        for (int k = 0; k < c; ++k)
          for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
              if (!inbounds(y, x)) continue;
              const Sample& t = taps[static_cast<std::size_t>(y) * w + x];
              const double gv = g(k, y, x);
              if (gs) {
                (*ds)(k, y, t.x0) += gv * (1.0 - t.frac);
                (*ds)(k, y, t.x1) += gv * t.frac;
              }
              // d(sample)/d(disparity) = -(s[x1] - s[x0])
              if (gd) (*dd)(0, y, x) -= gv * (s(k, y, t.x1) - s(k, y, t.x0));
            }
      });
  return {warped, std::move(inbounds)};
}

std::pair<Tensor, Mask> warp_right_to_left(const Tensor& source, const Tensor& disparity) {
  ag::Tape tape;
  WarpResult r = warp_right_to_left(tape.constant(source), tape.constant(disparity));
  return {r.warped.value(), std::move(r.inbounds)};
}

Tensor resample_disparity_nn(const Tensor& disparity, int height, int width) {
  ag::Tape tape;
  return resample_disparity_nn(tape.constant(disparity), height, width).value();
}

ag::Var resample_disparity_nn(ag::Var disparity, int height, int width) {
  const Tensor& d = disparity.value();
  if (height > d.height() || width > d.width() || height <= 0 || width <= 0)
    throw ContractError("resample_disparity_nn only downsamples; use upsample_to_full to upsample");
  if (height == d.height() && width == d.width()) return disparity;
  return ag::resample_nearest(disparity, height, width, static_cast<double>(width) / d.width());
}

Mask resample_mask_nn(const Mask& mask, int height, int width) {
  if (height == mask.height() && width == mask.width()) return mask;
  Mask out(height, width);
  for (int i = 0; i < height; ++i) {
    const int y = ag::nearest_source_index(i, mask.height(), height);
    for (int j = 0; j < width; ++j) out.set(i, j, mask(y, ag::nearest_source_index(j, mask.width(), width)));
  }
  return out;
}

}  // namespace semistereo::recon
