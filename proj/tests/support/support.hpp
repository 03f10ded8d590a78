#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "semistereo/tensor.hpp"

namespace testing_support {

using semistereo::Mask;
using semistereo::Tensor;

inline Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.values()) v = u(rng);
  return t;
}

inline Mask random_mask(int h, int w, std::mt19937_64& rng, double p_true = 0.7) {
  Mask m(h, w);
  std::bernoulli_distribution b(p_true);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(y, x, b(rng));
  return m;
}

/// |a - n| / max(|a|, |n|, floor)
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central finite difference of f with respect to element i of x.
inline double central_difference(const std::function<double(const Tensor&)>& f, Tensor x, std::size_t i,
                                 double h = 1e-6) {
  const double orig = x[i];
  x[i] = orig + h;
  const double fp = f(x);
  x[i] = orig - h;
  const double fm = f(x);
  return (fp - fm) / (2.0 * h);
}

/// Largest relative error between an analytic gradient and central
/// differences over every element of x.
inline double max_gradient_error(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                 const Tensor& analytic, double h = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    worst = std::max(worst, relative_error(analytic[i], central_difference(f, x, i, h)));
  return worst;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("semistereo_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing_support
