#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rsgeom/error.hpp"

namespace rsgeom {

/// Dense row-major 2-D grid of T.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {
    if (width < 0 || height < 0) fail(ErrorCode::InvalidArgument, "negative raster size");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  std::span<T> row(int y) { return {data_.data() + index(0, y), static_cast<std::size_t>(width_)}; }
  std::span<const T> row(int y) const {
    return {data_.data() + index(0, y), static_cast<std::size_t>(width_)};
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  template <typename U>
  bool same_shape(const Raster<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  bool operator==(const Raster&) const = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    assert(contains(x, y));
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Per-pixel validity. uint8_t rather than bool so rows are addressable spans.
using Mask = Raster<std::uint8_t>;

inline std::size_t count_set(const Mask& mask) {
  return static_cast<std::size_t>(std::count_if(mask.data().begin(), mask.data().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

inline Mask mask_and(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) fail(ErrorCode::DimensionMismatch, "mask_and");
  Mask out(a.width(), a.height());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = (a.data()[i] && b.data()[i]) ? 1 : 0;
  return out;
}

inline Mask mask_not(const Mask& a) {
  Mask out(a.width(), a.height());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a.data()[i] ? 0 : 1;
  return out;
}

/// Interleaved multi-channel float image, samples nominally in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, float fill = 0.0f)
      : width_(width),
        height_(height),
        channels_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {
    if (width < 0 || height < 0 || channels <= 0) fail(ErrorCode::InvalidArgument, "bad image shape");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }

  float& at(int x, int y, int c) { return data_[index(x, y, c)]; }
  float at(int x, int y, int c) const { return data_[index(x, y, c)]; }

  float* pixel(int x, int y) { return data_.data() + index(x, y, 0); }
  const float* pixel(int x, int y) const { return data_.data() + index(x, y, 0); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_shape(const Image& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }
  template <typename U>
  bool same_extent(const Raster<U>& r) const noexcept {
    return width_ == r.width() && height_ == r.height();
  }

  bool operator==(const Image&) const = default;

  /// Bilinear sample at continuous pixel coordinates, clamping to the border.
  void sample_bilinear(double x, double y, float* out) const {
    x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
    const int x0 = std::min(static_cast<int>(x), width_ - 1);
    const int y0 = std::min(static_cast<int>(y), height_ - 1);
    const int x1 = std::min(x0 + 1, width_ - 1);
    const int y1 = std::min(y0 + 1, height_ - 1);
    const double ax = x - x0;
    const double ay = y - y0;
    const float* p00 = pixel(x0, y0);
    const float* p10 = pixel(x1, y0);
    const float* p01 = pixel(x0, y1);
    const float* p11 = pixel(x1, y1);
    for (int c = 0; c < channels_; ++c) {
      const double top = p00[c] + ax * (p10[c] - p00[c]);
      const double bottom = p01[c] + ax * (p11[c] - p01[c]);
      out[c] = static_cast<float>(top + ay * (bottom - top));
    }
  }

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    assert(x >= 0 && y >= 0 && x < width_ && y < height_ && c >= 0 && c < channels_);
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Rec. 601 luma for 3-channel images, identity for 1-channel ones.
inline Raster<float> to_gray(const Image& img) {
  Raster<float> out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const float* p = img.pixel(x, y);
      if (img.channels() >= 3) {
        out(x, y) = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
      } else {
        out(x, y) = p[0];
      }
    }
  }
  return out;
}

}  // namespace rsgeom
