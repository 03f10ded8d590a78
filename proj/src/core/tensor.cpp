#include "semistereo/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "semistereo/error.hpp"

namespace semistereo {

Tensor::Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
  std::size_t n = 1;
  for (int d : shape_) {
    if (d < 0) throw ShapeError("negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  data_.assign(n, fill);
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string());
  return data_[0];
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
  os << ']';
  return os.str();
}

std::size_t Mask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Mask Mask::operator&(const Mask& other) const {
  if (!same_shape(other)) throw ShapeError("mask shape mismatch");
  Mask out(height_, width_);
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] & other.bits_[i];
  return out;
}

Mask Mask::operator|(const Mask& other) const {
  if (!same_shape(other)) throw ShapeError("mask shape mismatch");
  Mask out(height_, width_);
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] | other.bits_[i];
  return out;
}

Mask Mask::operator~() const {
  Mask out(height_, width_);
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] ? 0 : 1;
  return out;
}

}  // namespace semistereo
