#include "semistereo/autograd.hpp"

#include <algorithm>
#include <cmath>

#include "semistereo/error.hpp"

namespace semistereo::ag {

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor{}, false, {}});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor{}, true, {}});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward fn) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, Backward fn) {
  bool needs = false;
  for (const Var& v : inputs) {
    if (v.tape != this) throw ContractError("operands recorded on different tapes");
    needs = needs || requires_grad(v);
  }
  nodes_.push_back(Node{std::move(value), Tensor{}, needs, needs ? std::move(fn) : Backward{}});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Tensor& Tape::grad_buffer(Var v) {
  Node& n = nodes_.at(static_cast<std::size_t>(v.id));
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor::zeros_like(n.value);
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
  return n.grad.empty() ? Tensor::zeros_like(n.value) : n.grad;
}

void Tape::backward(Var root, double seed) {
  if (value(root).size() != 1) throw ShapeError("backward() needs a single-element root");
  for (auto& n : nodes_) n.grad = Tensor{};
  grad_buffer(root)[0] = seed;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
}

namespace {

void check_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

template <class F, class D>
Var unary(Var a, F f, D df) {
  const Tensor& x = a.value();
  Tensor y = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return a.tape->record(std::move(y), {a}, [a, df](Tape& t, const Tensor& g) {
    const Tensor& x = t.value(a);
    Tensor& gx = t.grad_buffer(a);
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[i] * df(x[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  check_same(a.value(), b.value(), "add");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return a.tape->record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    for (Var v : {a, b}) {
      if (!t.requires_grad(v)) continue;
      Tensor& gv = t.grad_buffer(v);
      for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  check_same(a.value(), b.value(), "sub");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  return a.tape->record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  check_same(a.value(), b.value(), "mul");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return a.tape->record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var div(Var a, Var b) {
  check_same(a.value(), b.value(), "div");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] /= bv[i];
  return a.tape->record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bv[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * av[i] / (bv[i] * bv[i]);
    }
  });
}

Var affine(Var a, double scale, double shift) {
  return unary(
      a, [=](double x) { return scale * x + shift; }, [=](double) { return scale; });
}

Var abs(Var a) {
  return unary(
      a, [](double x) { return std::abs(x); },
      [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      a, [=](double x) { return std::clamp(x, lo, hi); },
      [=](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      a, [=](double x) { return x > 0.0 ? x : slope * x; },
      [=](double x) { return x > 0.0 ? 1.0 : slope; });
}

Var softplus(Var a) {
  return unary(
      a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var detach(Var a) { return a.tape->constant(a.value()); }

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape->record(Tensor::scalar(s), {a}, [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
  });
}

Var channel_mean(Var a) {
  const Tensor& x = a.value();
  const int c = x.channels(), h = x.height(), w = x.width();
  Tensor y = Tensor::chw(1, h, w);
  for (int k = 0; k < c; ++k)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) y(0, i, j) += x(k, i, j);
  for (double& v : y.values()) v /= c;
  return a.tape->record(std::move(y), {a}, [a](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(a);
    const int c = gx.channels(), h = gx.height(), w = gx.width();
    for (int k = 0; k < c; ++k)
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) gx(k, i, j) += g(0, i, j) / c;
  });
}

Var concat_channels(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Tensor& first = parts[0].value();
  const int h = first.height();
  const int w = first.width();
  int channels = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    if (v.rank() != 3 || v.height() != h || v.width() != w)
      throw ShapeError("concat_channels: spatial size mismatch");
    channels += v.channels();
  }
  Tensor y = Tensor::chw(channels, h, w);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    std::copy(v.data(), v.data() + v.size(), y.data() + offset);
    offset += v.size();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape->record(std::move(y), parts, [inputs](Tape& t, const Tensor& g) {
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t n = t.value(p).size();
      if (t.requires_grad(p)) {
        Tensor& gp = t.grad_buffer(p);
        for (std::size_t i = 0; i < n; ++i) gp[i] += g[offset + i];
      }
      offset += n;
    }
  });
}

Var weighted_sum(std::span<const std::pair<Var, double>> terms) {
  if (terms.empty()) throw ShapeError("weighted_sum: no terms");
  double total = 0.0;
  std::vector<Var> inputs;
  std::vector<double> weights;
  for (const auto& [v, w] : terms) {
    total += w * v.value().item();
    inputs.push_back(v);
    weights.push_back(w);
  }
  return terms[0].first.tape->record(
      Tensor::scalar(total), std::span<const Var>(inputs),
      [inputs, weights](Tape& t, const Tensor& g) {
        for (std::size_t i = 0; i < inputs.size(); ++i) {
          if (t.requires_grad(inputs[i])) t.grad_buffer(inputs[i])[0] += weights[i] * g[0];
        }
      });
}

int nearest_source_index(int target_index, int source_size, int target_size) {
  const double s = (target_index + 0.5) * static_cast<double>(source_size) / target_size - 0.5;
  const int i = static_cast<int>(std::lround(s));
  return std::clamp(i, 0, source_size - 1);
}

Var resample_nearest(Var input, int height, int width, double value_scale) {
  const Tensor& x = input.value();
  const int c = x.channels(), h = x.height(), w = x.width();
  std::vector<int> ys(static_cast<std::size_t>(height)), xs(static_cast<std::size_t>(width));
  for (int i = 0; i < height; ++i) ys[i] = nearest_source_index(i, h, height);
  for (int j = 0; j < width; ++j) xs[j] = nearest_source_index(j, w, width);
  Tensor y = Tensor::chw(c, height, width);
  for (int k = 0; k < c; ++k)
    for (int i = 0; i < height; ++i)
      for (int j = 0; j < width; ++j) y(k, i, j) = x(k, ys[i], xs[j]) * value_scale;
  return input.tape->record(std::move(y), {input},
                            [input, ys, xs, value_scale](Tape& t, const Tensor& g) {
                              Tensor& gx = t.grad_buffer(input);
                              const int c = g.channels();
                              for (int k = 0; k < c; ++k)
                                for (std::size_t i = 0; i < ys.size(); ++i)
                                  for (std::size_t j = 0; j < xs.size(); ++j)
                                    gx(k, ys[i], xs[j]) += g(k, static_cast<int>(i), static_cast<int>(j)) * value_scale;
                            });
}

namespace {

struct LerpTap {
  int i0, i1;
  double frac;
};

std::vector<LerpTap> bilinear_taps(int source, int target) {
  std::vector<LerpTap> taps(static_cast<std::size_t>(target));
  const double ratio = static_cast<double>(source) / target;
  for (int i = 0; i < target; ++i) {
    double s = std::clamp((i + 0.5) * ratio - 0.5, 0.0, static_cast<double>(source - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, source - 1);
    taps[i] = {i0, i1, s - i0};
  }
  return taps;
}

}  // namespace

Var upsample_bilinear(Var input, int height, int width, double value_scale) {
  const Tensor& x = input.value();
  const int c = x.channels(), h = x.height(), w = x.width();
  auto ty = bilinear_taps(h, height);
  auto tx = bilinear_taps(w, width);
  Tensor y = Tensor::chw(c, height, width);
  for (int k = 0; k < c; ++k) {
    for (int i = 0; i < height; ++i) {
      const LerpTap& a = ty[i];
      for (int j = 0; j < width; ++j) {
        const LerpTap& b = tx[j];
        const double top = x(k, a.i0, b.i0) + b.frac * (x(k, a.i0, b.i1) - x(k, a.i0, b.i0));
        const double bot = x(k, a.i1, b.i0) + b.frac * (x(k, a.i1, b.i1) - x(k, a.i1, b.i0));
        y(k, i, j) = value_scale * (top + a.frac * (bot - top));
      }
    }
  }
  return input.tape->record(std::move(y), {input},
                            [input, ty, tx, value_scale](Tape& t, const Tensor& g) {
                              Tensor& gx = t.grad_buffer(input);
                              const int c = g.channels();
                              for (int k = 0; k < c; ++k) {
                                for (std::size_t i = 0; i < ty.size(); ++i) {
                                  const LerpTap& a = ty[i];
                                  for (std::size_t j = 0; j < tx.size(); ++j) {
                                    const LerpTap& b = tx[j];
                                    const double v = value_scale * g(k, static_cast<int>(i), static_cast<int>(j));
                                    gx(k, a.i0, b.i0) += v * (1.0 - a.frac) * (1.0 - b.frac);
                                    gx(k, a.i0, b.i1) += v * (1.0 - a.frac) * b.frac;
                                    gx(k, a.i1, b.i0) += v * a.frac * (1.0 - b.frac);
                                    gx(k, a.i1, b.i1) += v * a.frac * b.frac;
                                  }
                                }
                              }
                            });
}

Var masked_box3(Var input, const Mask& mask) {
  const Tensor& x = input.value();
  const int c = x.channels(), h = x.height(), w = x.width();
  if (mask.height() != h || mask.width() != w) throw ShapeError("masked_box3: mask shape mismatch");
  // Reciprocal of the number of masked pixels in each window (0 if unmasked centre).
  Tensor inv_count = Tensor::chw(1, h, w);
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      if (!mask(y, xx)) continue;
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xq = xx + dx;
          if (yy >= 0 && yy < h && xq >= 0 && xq < w && mask(yy, xq)) ++n;
        }
      inv_count(0, y, xx) = 1.0 / n;
    }
  }
  Tensor out = Tensor::chw(c, h, w);
  for (int k = 0; k < c; ++k)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        if (!mask(y, xx)) continue;
        double s = 0.0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy, xq = xx + dx;
            if (yy >= 0 && yy < h && xq >= 0 && xq < w && mask(yy, xq)) s += x(k, yy, xq);
          }
        out(k, y, xx) = s * inv_count(0, y, xx);
      }
  return input.tape->record(std::move(out), {input},
                            [input, mask, inv_count](Tape& t, const Tensor& g) {
                              Tensor& gx = t.grad_buffer(input);
                              const int c = g.channels(), h = g.height(), w = g.width();
                              for (int k = 0; k < c; ++k)
                                for (int y = 0; y < h; ++y)
                                  for (int xx = 0; xx < w; ++xx) {
                                    if (!mask(y, xx)) continue;
                                    const double v = g(k, y, xx) * inv_count(0, y, xx);
                                    for (int dy = -1; dy <= 1; ++dy)
                                      for (int dx = -1; dx <= 1; ++dx) {
                                        const int yy = y + dy, xq = xx + dx;
                                        if (yy >= 0 && yy < h && xq >= 0 && xq < w && mask(yy, xq))
                                          gx(k, yy, xq) += v;
                                      }
                                  }
                            });
}

Var masked_mean(Var input, const Mask& mask) {
  const Tensor& x = input.value();
  const int c = x.channels(), h = x.height(), w = x.width();
  if (mask.height() != h || mask.width() != w) throw ShapeError("masked_mean: mask shape mismatch");
  const std::size_t n = mask.count();
  if (n == 0) throw DegenerateBatchError("masked mean over an empty mask");
  const double denom = static_cast<double>(n) * c;
  double s = 0.0;
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx) {
      if (!mask(y, xx)) continue;
      for (int k = 0; k < c; ++k) s += x(k, y, xx);
    }
  return input.tape->record(Tensor::scalar(s / denom), {input},
                            [input, mask, denom](Tape& t, const Tensor& g) {
                              Tensor& gx = t.grad_buffer(input);
                              const int c = gx.channels(), h = gx.height(), w = gx.width();
                              const double v = g[0] / denom;
                              for (int k = 0; k < c; ++k)
                                for (int y = 0; y < h; ++y)
                                  for (int xx = 0; xx < w; ++xx)
                                    if (mask(y, xx)) gx(k, y, xx) += v;
                            });
}

Var bce_with_logits(Var logits, const Mask& targets) {
  const Tensor& z = logits.value();
  if (z.channels() != 1 || z.height() != targets.height() || z.width() != targets.width())
    throw ShapeError("bce_with_logits: shape mismatch");
  Tensor out = Tensor::zeros_like(z);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double t = targets[i] ? 1.0 : 0.0;
    out[i] = std::max(z[i], 0.0) - z[i] * t + std::log1p(std::exp(-std::abs(z[i])));
  }
  return logits.tape->record(std::move(out), {logits}, [logits, targets](Tape& t, const Tensor& g) {
    const Tensor& z = t.value(logits);
    Tensor& gz = t.grad_buffer(logits);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-z[i]));
      gz[i] += g[i] * (p - (targets[i] ? 1.0 : 0.0));
    }
  });
}

}  // namespace semistereo::ag
