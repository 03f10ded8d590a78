#include <memory>

#include <Eigen/Core>

#include "semistereo/autograd.hpp"
#include "semistereo/error.hpp"

namespace semistereo::ag {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct Geometry {
  int channels, height, width;  // image side
  int kernel, stride, pad;
  int out_h, out_w;             // column side
};

// Unfolds the image into a (C*k*k) x (out_h*out_w) row-major matrix.
void im2col(const double* img, const Geometry& g, double* col) {
  const int n = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c)
    for (int ky = 0; ky < g.kernel; ++ky)
      for (int kx = 0; kx < g.kernel; ++kx) {
        double* row = col + static_cast<std::size_t>((c * g.kernel + ky) * g.kernel + kx) * n;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          double* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = img + (static_cast<std::size_t>(c) * g.height + iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : 0.0;
          }
        }
      }
}

// Adjoint of im2col: scatters columns back into (accumulates onto) the image.
void col2im(const double* col, const Geometry& g, double* img) {
  const int n = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c)
    for (int ky = 0; ky < g.kernel; ++ky)
      for (int kx = 0; kx < g.kernel; ++kx) {
        const double* row = col + static_cast<std::size_t>((c * g.kernel + ky) * g.kernel + kx) * n;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.height) continue;
          double* dst = img + (static_cast<std::size_t>(c) * g.height + iy) * g.width;
          const double* src = row + oy * g.out_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
}

}  // namespace

Var conv2d(Var input, Var weight, Var bias, int stride, int pad) {
  const Tensor& x = input.value();
  const Tensor& w = weight.value();
  if (x.rank() != 3 || w.rank() != 4 || w.dim(1) != x.channels() || w.dim(2) != w.dim(3))
    throw ShapeError("conv2d: input " + x.shape_string() + " incompatible with weight " +
                     w.shape_string());
  const int co = w.dim(0), k = w.dim(2);
  if (bias.value().size() != static_cast<std::size_t>(co)) throw ShapeError("conv2d: bias size");
  Geometry g{x.channels(), x.height(), x.width(), k, stride, pad, 0, 0};
  g.out_h = (g.height + 2 * pad - k) / stride + 1;
  g.out_w = (g.width + 2 * pad - k) / stride + 1;
  if (g.out_h <= 0 || g.out_w <= 0) throw ShapeError("conv2d: input smaller than kernel");
  const int rows = g.channels * k * k;
  const int n = g.out_h * g.out_w;

  auto col = std::make_shared<RowMat>(rows, n);
  im2col(x.data(), g, col->data());
  Tensor y = Tensor::chw(co, g.out_h, g.out_w);
  MapMat ym(y.data(), co, n);
  ym.noalias() = ConstMapMat(w.data(), co, rows) * (*col);
  const Tensor& b = bias.value();
  for (int o = 0; o < co; ++o) ym.row(o).array() += b[o];

  return input.tape->record(
      std::move(y), {input, weight, bias}, [input, weight, bias, g, col, co, rows, n](Tape& t, const Tensor& gy) {
        ConstMapMat gm(gy.data(), co, n);
        if (t.requires_grad(weight)) {
          MapMat(t.grad_buffer(weight).data(), co, rows).noalias() += gm * col->transpose();
        }
        if (t.requires_grad(bias)) {
          Tensor& gb = t.grad_buffer(bias);
          for (int o = 0; o < co; ++o) gb[o] += gm.row(o).sum();
        }
        if (t.requires_grad(input)) {
          RowMat gcol = ConstMapMat(t.value(weight).data(), co, rows).transpose() * gm;
          col2im(gcol.data(), g, t.grad_buffer(input).data());
        }
      });
}

Var conv_transpose2d(Var input, Var weight, Var bias, int stride, int pad) {
  const Tensor& x = input.value();
  const Tensor& w = weight.value();
  if (x.rank() != 3 || w.rank() != 4 || w.dim(0) != x.channels() || w.dim(2) != w.dim(3))
    throw ShapeError("conv_transpose2d: input " + x.shape_string() + " incompatible with weight " +
                     w.shape_string());
  const int ci = x.channels(), co = w.dim(1), k = w.dim(2);
  if (bias.value().size() != static_cast<std::size_t>(co))
    throw ShapeError("conv_transpose2d: bias size");
  const int out_h = (x.height() - 1) * stride - 2 * pad + k;
  const int out_w = (x.width() - 1) * stride - 2 * pad + k;
  // Geometry of the forward convolution this operation is the adjoint of:
  // image = output of this op, columns = input of this op.
  Geometry g{co, out_h, out_w, k, stride, pad, x.height(), x.width()};
  const int rows = co * k * k;
  const int n = x.height() * x.width();

  RowMat cols = ConstMapMat(w.data(), ci, rows).transpose() * ConstMapMat(x.data(), ci, n);
  Tensor y = Tensor::chw(co, out_h, out_w);
  col2im(cols.data(), g, y.data());
  const Tensor& b = bias.value();
  const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
  for (int o = 0; o < co; ++o)
    for (std::size_t i = 0; i < plane; ++i) y[o * plane + i] += b[o];

  return input.tape->record(
      std::move(y), {input, weight, bias}, [input, weight, bias, g, ci, co, rows, n, plane](Tape& t, const Tensor& gy) {
        if (t.requires_grad(bias)) {
          Tensor& gb = t.grad_buffer(bias);
          for (int o = 0; o < co; ++o) {
            double s = 0.0;
            for (std::size_t i = 0; i < plane; ++i) s += gy[o * plane + i];
            gb[o] += s;
          }
        }
        if (!t.requires_grad(input) && !t.requires_grad(weight)) return;
        RowMat gcol(rows, n);
        im2col(gy.data(), g, gcol.data());
        if (t.requires_grad(weight)) {
          MapMat(t.grad_buffer(weight).data(), ci, rows).noalias() +=
              ConstMapMat(t.value(input).data(), ci, n) * gcol.transpose();
        }
        if (t.requires_grad(input)) {
          MapMat(t.grad_buffer(input).data(), ci, n).noalias() +=
              ConstMapMat(t.value(weight).data(), ci, rows) * gcol;
        }
      });
}

}  // namespace semistereo::ag
