#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rsgeom/error.hpp"
#include "rsgeom/raster.hpp"

namespace rsgeom {

/// Value returned by psnr() when the two inputs agree exactly.
inline constexpr double kPsnrCap = 99.0;

/// Mean squared difference over all channels of the masked pixels.
inline double mean_squared_error(const Image& a, const Image& b, const Mask* mask = nullptr) {
  if (!a.same_shape(b)) fail(ErrorCode::DimensionMismatch, "image shapes differ");
  if (mask != nullptr && !a.same_extent(*mask)) fail(ErrorCode::DimensionMismatch, "mask shape");
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (mask != nullptr && !(*mask)(x, y)) continue;
      const float* pa = a.pixel(x, y);
      const float* pb = b.pixel(x, y);
      for (int c = 0; c < a.channels(); ++c) {
        const double d = static_cast<double>(pa[c]) - pb[c];
        sum += d * d;
      }
      count += static_cast<std::size_t>(a.channels());
    }
  }
  if (count == 0) fail(ErrorCode::EmptyMask, "no pixels selected");
  return sum / static_cast<double>(count);
}

/// Peak signal-to-noise ratio in dB over the masked pixels, capped at
/// kPsnrCap. `peak` is the maximum sample value (1 for the float images used here).
inline double psnr(const Image& a, const Image& b, const Mask* mask = nullptr, double peak = 1.0) {
  const double mse = mean_squared_error(a, b, mask);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

namespace detail {

/// 'valid' separable correlation of a (width x height) plane with a 1-D kernel.
inline std::vector<double> filter_valid(const std::vector<double>& plane, int width, int height,
                                        const std::vector<double>& kernel) {
  const int n = static_cast<int>(kernel.size());
  const int ow = width - n + 1;
  const int oh = height - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += kernel[i] * plane[static_cast<std::size_t>(y) * width + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += kernel[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace detail

/// Gaussian-windowed SSIM averaged over every window lying fully inside the
/// image (and fully inside `mask` when given) and over channels.
inline double ssim(const Image& a, const Image& b, const Mask* mask = nullptr, const SsimParams& p = {}) {
  if (!a.same_shape(b)) fail(ErrorCode::DimensionMismatch, "ssim: image shapes differ");
  if (mask != nullptr && !a.same_extent(*mask)) fail(ErrorCode::DimensionMismatch, "ssim: mask shape");
  const int w = a.width();
  const int h = a.height();
  const int n = p.window;
  if (n < 1 || w < n || h < n) fail(ErrorCode::InvalidArgument, "ssim: image smaller than window");

  std::vector<double> kernel(n);
  double ksum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = i - 0.5 * (n - 1);
    kernel[i] = std::exp(-d * d / (2.0 * p.sigma * p.sigma));
    ksum += kernel[i];
  }
  for (double& k : kernel) k /= ksum;

  const int ow = w - n + 1;
  const int oh = h - n + 1;
  std::vector<std::uint8_t> window_ok(static_cast<std::size_t>(ow) * oh, 1);
  if (mask != nullptr) {
    // summed-area table of invalid pixels
    std::vector<int> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        sat[(y + 1) * (w + 1) + x + 1] = ((*mask)(x, y) ? 0 : 1) + sat[y * (w + 1) + x + 1] +
                                         sat[(y + 1) * (w + 1) + x] - sat[y * (w + 1) + x];
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        const int bad = sat[(y + n) * (w + 1) + x + n] - sat[y * (w + 1) + x + n] - sat[(y + n) * (w + 1) + x] +
                        sat[y * (w + 1) + x];
        window_ok[static_cast<std::size_t>(y) * ow + x] = bad == 0 ? 1 : 0;
      }
  }

  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  const std::size_t npx = static_cast<std::size_t>(w) * h;
  double total = 0.0;
  std::size_t windows = 0;
  for (int c = 0; c < a.channels(); ++c) {
    std::vector<double> pa(npx), pb(npx), paa(npx), pbb(npx), pab(npx);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        pa[i] = a.at(x, y, c);
        pb[i] = b.at(x, y, c);
        paa[i] = pa[i] * pa[i];
        pbb[i] = pb[i] * pb[i];
        pab[i] = pa[i] * pb[i];
      }
    const auto mu_a = detail::filter_valid(pa, w, h, kernel);
    const auto mu_b = detail::filter_valid(pb, w, h, kernel);
    const auto e_aa = detail::filter_valid(paa, w, h, kernel);
    const auto e_bb = detail::filter_valid(pbb, w, h, kernel);
    const auto e_ab = detail::filter_valid(pab, w, h, kernel);
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      if (!window_ok[i]) continue;
      const double ma = mu_a[i];
      const double mb = mu_b[i];
      const double va = e_aa[i] - ma * ma;
      const double vb = e_bb[i] - mb * mb;
      const double cov = e_ab[i] - ma * mb;
      total += ((2.0 * (ma * mb) + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++windows;
    }
  }
  if (windows == 0) fail(ErrorCode::EmptyMask, "ssim: no window fully inside the mask");
  return total / static_cast<double>(windows);
}

}  // namespace rsgeom
