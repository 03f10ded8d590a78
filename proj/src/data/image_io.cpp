#include "semistereo/data/image_io.hpp"

#include <cmath>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "semistereo/error.hpp"

namespace semistereo::data {

namespace {

cv::Mat load(const std::filesystem::path& path, int flags) {
  if (!std::filesystem::exists(path)) throw IoError("missing file " + path.string());
  cv::Mat m = cv::imread(path.string(), flags);
  if (m.empty()) throw FormatError("cannot decode image " + path.string());
  return m;
}

void store(const std::filesystem::path& path, const cv::Mat& m) {
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write " + path.string());
}

}  // namespace

std::pair<Tensor, Mask> read_disparity_png16(const std::filesystem::path& path) {
  cv::Mat m = load(path, cv::IMREAD_UNCHANGED);
  if (m.depth() != CV_16U) throw FormatError("disparity PNG must be 16-bit: " + path.string());
  if (m.channels() != 1) throw FormatError("disparity PNG must be single-channel: " + path.string());
  Tensor disp = Tensor::chw(1, m.rows, m.cols);
  Mask valid(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) {
      const std::uint16_t raw = m.at<std::uint16_t>(y, x);
      disp(0, y, x) = raw / 256.0;
      valid.set(y, x, raw > 0);
    }
  return {std::move(disp), std::move(valid)};
}

void write_disparity_png16(const std::filesystem::path& path, const Tensor& disparity,
                           const Mask& valid) {
  if (disparity.rank() != 3 || disparity.channels() != 1 || disparity.height() != valid.height() ||
      disparity.width() != valid.width())
    throw ShapeError("write_disparity_png16: shape mismatch");
  cv::Mat m(disparity.height(), disparity.width(), CV_16UC1);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) {
      std::uint16_t raw = 0;
      if (valid(y, x)) {
        const double r = std::round(disparity(0, y, x) * 256.0);
        raw = static_cast<std::uint16_t>(std::clamp(r, 1.0, 65535.0));
      }
      m.at<std::uint16_t>(y, x) = raw;
    }
  store(path, m);
}

Tensor read_image(const std::filesystem::path& path) {
  cv::Mat m = load(path, cv::IMREAD_COLOR);
  if (m.depth() != CV_8U) throw FormatError("expected an 8-bit image: " + path.string());
  Tensor img = Tensor::chw(3, m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) {
      const cv::Vec3b bgr = m.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) img(c, y, x) = bgr[2 - c] / 255.0;
    }
  return img;
}

void write_image(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || image.channels() != 3) throw ShapeError("write_image: expects 3xHxW");
  cv::Mat m(image.height(), image.width(), CV_8UC3);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) {
      cv::Vec3b& bgr = m.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c)
        bgr[2 - c] = static_cast<std::uint8_t>(std::lround(std::clamp(image(c, y, x), 0.0, 1.0) * 255.0));
    }
  store(path, m);
}

Mask read_mask(const std::filesystem::path& path) {
  cv::Mat m = load(path, cv::IMREAD_GRAYSCALE);
  Mask mask(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) mask.set(y, x, m.at<std::uint8_t>(y, x) >= 128);
  return mask;
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
  cv::Mat m(mask.height(), mask.width(), CV_8UC1);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) m.at<std::uint8_t>(y, x) = mask(y, x) ? 255 : 0;
  store(path, m);
}

}  // namespace semistereo::data
