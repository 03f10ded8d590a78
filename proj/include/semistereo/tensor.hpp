#pragma once

#include <cstddef>
#include <cstdint>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace semistereo {

/// Cache-line aligned storage. Vectorised kernels peel unaligned heads, so an
/// address-dependent alignment would make reductions address-dependent too.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <class U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
    return true;
  }
};

/// Dense row-major array of doubles. Image-like data uses the CHW layout
/// (channels, height, width); convolution weights are rank 4.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);

  static Tensor chw(int channels, int height, int width, double fill = 0.0) {
    return Tensor({channels, height, width}, fill);
  }
  static Tensor scalar(double value) { return Tensor({1}, value); }
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<int>& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  int channels() const { return dim(0); }
  int height() const { return dim(1); }
  int width() const { return dim(2); }

  double& operator()(int c, int y, int x) noexcept {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  double operator()(int c, int y, int x) const noexcept {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() & noexcept { return data_; }
  std::span<const double> values() const& noexcept { return data_; }
  // A span into a temporary would dangle.
  std::span<const double> values() const&& = delete;

  /// Value of a single-element tensor.
  double item() const;

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<int> shape_;
  std::vector<double, AlignedAllocator<double>> data_;
};

/// H×W boolean map. Stored as bytes so it can be addressed and spanned.
class Mask {
 public:
  Mask() = default;
  Mask(int height, int width, bool fill = false)
      : height_(height), width_(width),
        bits_(static_cast<std::size_t>(height) * width, fill ? 1 : 0) {}

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool operator()(int y, int x) const noexcept {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set(int y, int x, bool value) noexcept {
    bits_[static_cast<std::size_t>(y) * width_ + x] = value ? 1 : 0;
  }
  bool operator[](std::size_t i) const noexcept { return bits_[i] != 0; }

  std::size_t count() const noexcept;
  bool any() const noexcept { return count() > 0; }
  bool same_shape(const Mask& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  Mask operator&(const Mask& other) const;
  Mask operator|(const Mask& other) const;
  Mask operator~() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace semistereo
