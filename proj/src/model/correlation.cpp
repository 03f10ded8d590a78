#include "semistereo/model/correlation.hpp"

#include "semistereo/error.hpp"

namespace semistereo::model {

namespace {

void check(const Tensor& l, const Tensor& r, int max_displacement) {
  if (l.rank() != 3 || !l.same_shape(r))
    throw ShapeError("correlate: feature shapes differ " + l.shape_string() + " vs " + r.shape_string());
  if (max_displacement < 0) throw ContractError("correlate: negative max_displacement");
}

}  // namespace

Tensor correlate(const Tensor& left, const Tensor& right, int max_displacement) {
  check(left, right, max_displacement);
  const int c = left.channels(), h = left.height(), w = left.width();
  const double inv_c = 1.0 / c;
  Tensor out = Tensor::chw(max_displacement + 1, h, w);
  for (int d = 0; d <= max_displacement; ++d)
    for (int y = 0; y < h; ++y)
      for (int x = d; x < w; ++x) {
        double s = 0.0;
        for (int k = 0; k < c; ++k) s += left(k, y, x) * right(k, y, x - d);
        out(d, y, x) = s * inv_c;
      }
  return out;
}

ag::Var correlate(ag::Var left, ag::Var right, int max_displacement) {
  Tensor out = correlate(left.value(), right.value(), max_displacement);
  return left.tape->record(std::move(out), {left, right}, [left, right, max_displacement](ag::Tape& t, const Tensor& g) {
    const Tensor& lv = t.value(left);
    const Tensor& rv = t.value(right);
    const int c = lv.channels(), h = lv.height(), w = lv.width();
    const double inv_c = 1.0 / c;
    const bool gl = t.requires_grad(left), gr = t.requires_grad(right);
    Tensor* dl = gl ? &t.grad_buffer(left) : nullptr;
    Tensor* dr = gr ? &t.grad_buffer(right) : nullptr;
    for (int d = 0; d <= max_displacement; ++d)
      for (int y = 0; y < h; ++y)
        for (int x = d; x < w; ++x) {
          const double v = g(d, y, x) * inv_c;
          if (v == 0.0) continue;
          for (int k = 0; k < c; ++k) {
            if (gl) (*dl)(k, y, x) += v * rv(k, y, x - d);
            if (gr) (*dr)(k, y, x - d) += v * lv(k, y, x);
          }
        }
  });
}

}  // namespace semistereo::model
