#pragma once

#include <deque>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "semistereo/tensor.hpp"

/// Minimal reverse-mode automatic differentiation over Tensor values.
///
/// A Tape records every operation applied to its Vars. backward() walks the
/// tape in reverse creation order and accumulates gradients into every node
/// that (transitively) depends on a variable. Constants never receive
/// gradients and operations whose inputs are all constants record no
/// backward closure, so inference over a tape of constants costs only the
/// forward pass.
namespace semistereo::ag {

class Tape;

/// Handle to a node on a tape. Cheap to copy.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const noexcept { return tape != nullptr && id >= 0; }
  const Tensor& value() const;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);

  const Tensor& value(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).value; }
  bool requires_grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).requires_grad; }

  /// Gradient reached at v by the last backward(); zeros when none did.
  Tensor grad(Var v) const;

  /// Seeds d(root)/d(root) = 1 for a single-element root and propagates.
  void backward(Var root, double seed = 1.0);

  /// Used by operation implementations.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward fn);
  Var record(Tensor value, std::span<const Var> inputs, Backward fn);
  /// Zero-initialised on first access.
  Tensor& grad_buffer(Var v);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::deque<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(*this); }

// Elementwise arithmetic. Operands must have identical shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
/// scale * a + shift
Var affine(Var a, double scale, double shift = 0.0);
Var abs(Var a);
Var clamp(Var a, double lo, double hi);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var softplus(Var a);
/// Copies the value onto the tape as a constant; gradients stop here.
Var detach(Var a);

/// Concatenates CHW tensors with equal H and W along the channel axis.
Var concat_channels(std::span<const Var> parts);

/// 2-D convolution of a CHW input with weights [Co, Ci, k, k] and bias [Co].
Var conv2d(Var input, Var weight, Var bias, int stride, int pad);
/// Transposed convolution (adjoint of conv2d) with weights [Ci, Co, k, k].
/// Output size is (in - 1) * stride - 2 * pad + k.
Var conv_transpose2d(Var input, Var weight, Var bias, int stride, int pad);

/// Bilinear resize with half-pixel centres, values multiplied by value_scale.
Var upsample_bilinear(Var input, int height, int width, double value_scale);
/// Nearest-neighbour resize using the centre-aligned index
/// round((i + 0.5) * H / h - 0.5), values multiplied by value_scale.
Var resample_nearest(Var input, int height, int width, double value_scale);
int nearest_source_index(int target_index, int source_size, int target_size);

/// 3x3 box mean over the pixels of the window that are set in mask (the
/// window is clipped at image borders). Outputs zero at unmasked pixels.
Var masked_box3(Var input, const Mask& mask);

/// Mean over all channels and masked pixels; scalar result.
/// Throws DegenerateBatchError when the mask is empty.
Var masked_mean(Var input, const Mask& mask);

/// Per-pixel binary cross-entropy of sigmoid(logits) against 0/1 targets,
/// numerically stable form. Output has the logits' shape (1 x H x W).
Var bce_with_logits(Var logits, const Mask& targets);

/// Sum of weight_i * term_i over scalar terms, accumulated in order.
Var weighted_sum(std::span<const std::pair<Var, double>> terms);

/// Sum of all elements (scalar result).
Var sum(Var a);

/// Mean over channels of a CHW tensor; result is 1 x H x W.
Var channel_mean(Var a);

}  // namespace semistereo::ag
