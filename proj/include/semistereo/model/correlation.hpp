#pragma once

#include "semistereo/autograd.hpp"

namespace semistereo::model {

/// One-sided 1-D correlation along rows:
///   out(d, y, x) = (1/C) * sum_c left(c, y, x) * right(c, y, x - d),  d in [0, D],
/// zero where x - d < 0. Inputs are C x H x W with equal shapes.
Tensor correlate(const Tensor& left, const Tensor& right, int max_displacement);
ag::Var correlate(ag::Var left, ag::Var right, int max_displacement);

}  // namespace semistereo::model
