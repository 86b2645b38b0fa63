#pragma once

// Dense pyramidal Lucas-Kanade, used when no ground-truth or file flow is
// available.

#include <algorithm>
#include <cmath>
#include <vector>

#include "rsgeom/geometry.hpp"
#include "rsgeom/raster.hpp"

namespace rsgeom {

struct LkParams {
  int levels = 4;
  int window = 11;  // odd, box window side
  int iterations = 6;
  double min_eigenvalue = 1e-5;  // per-pixel mean structure tensor, intensities in [0, 1]
};

namespace detail {

inline Raster<float> pyr_down(const Raster<float>& src) {
  const int w = src.width();
  const int h = src.height();
  constexpr float k[5] = {1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16, 1.f / 16};
  auto at = [](const Raster<float>& r, int x, int y) {
    x = std::clamp(x, 0, r.width() - 1);
    y = std::clamp(y, 0, r.height() - 1);
    return r(x, y);
  };
  Raster<float> tmp(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float s = 0.f;
      for (int i = -2; i <= 2; ++i) s += k[i + 2] * at(src, x + i, y);
      tmp(x, y) = s;
    }
  Raster<float> out((w + 1) / 2, (h + 1) / 2);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      float s = 0.f;
      for (int i = -2; i <= 2; ++i) s += k[i + 2] * at(tmp, 2 * x, 2 * y + i);
      out(x, y) = s;
    }
  return out;
}

inline float sample(const Raster<float>& r, double x, double y) {
  x = std::clamp(x, 0.0, r.width() - 1.0);
  y = std::clamp(y, 0.0, r.height() - 1.0);
  const int x0 = std::min(static_cast<int>(x), r.width() - 1);
  const int y0 = std::min(static_cast<int>(y), r.height() - 1);
  const int x1 = std::min(x0 + 1, r.width() - 1);
  const int y1 = std::min(y0 + 1, r.height() - 1);
  const double ax = x - x0;
  const double ay = y - y0;
  const double top = r(x0, y0) + ax * (r(x1, y0) - r(x0, y0));
  const double bot = r(x0, y1) + ax * (r(x1, y1) - r(x0, y1));
  return static_cast<float>(top + ay * (bot - top));
}

/// Box sum over a (2r+1)^2 window with clamped borders, via a summed-area table.
inline Raster<double> box_sum(const Raster<double>& src, int radius) {
  const int w = src.width();
  const int h = src.height();
  std::vector<double> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      sat[(y + 1) * (w + 1) + x + 1] =
          src(x, y) + sat[y * (w + 1) + x + 1] + sat[(y + 1) * (w + 1) + x] - sat[y * (w + 1) + x];
  Raster<double> out(w, h);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - radius);
    const int y1 = std::min(h, y + radius + 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - radius);
      const int x1 = std::min(w, x + radius + 1);
      out(x, y) = sat[y1 * (w + 1) + x1] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0] + sat[y0 * (w + 1) + x0];
    }
  }
  return out;
}

}  // namespace detail

/// Coarse-to-fine dense Lucas-Kanade flow from img1 to img2. Pixels whose
/// window structure tensor is poorly conditioned are invalid.
inline FlowField estimate_flow_lk(const Image& img1, const Image& img2, const LkParams& params = {}) {
  if (!img1.same_shape(img2)) fail(ErrorCode::DimensionMismatch, "lk: image shapes differ");
  if (params.levels < 1 || params.window < 3) fail(ErrorCode::InvalidArgument, "lk: bad parameters");
  std::vector<Raster<float>> pyr1{to_gray(img1)};
  std::vector<Raster<float>> pyr2{to_gray(img2)};
  for (int l = 1; l < params.levels; ++l) {
    if (pyr1.back().width() < 2 * params.window || pyr1.back().height() < 2 * params.window) break;
    pyr1.push_back(detail::pyr_down(pyr1.back()));
    pyr2.push_back(detail::pyr_down(pyr2.back()));
  }
  const int radius = params.window / 2;
  const double area = static_cast<double>((2 * radius + 1) * (2 * radius + 1));

  Raster<Eigen::Vector2d> flow(pyr1.back().width(), pyr1.back().height(), Eigen::Vector2d::Zero());
  Mask valid;
  for (int level = static_cast<int>(pyr1.size()) - 1; level >= 0; --level) {
    const Raster<float>& a = pyr1[level];
    const Raster<float>& b = pyr2[level];
    const int w = a.width();
    const int h = a.height();
    if (flow.width() != w || flow.height() != h) {
      // bilinear upsampling of the coarse estimate, doubled
      Raster<Eigen::Vector2d> up(w, h);
      const int cw = flow.width();
      const int ch = flow.height();
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double cx = std::clamp(0.5 * x, 0.0, cw - 1.0);
          const double cy = std::clamp(0.5 * y, 0.0, ch - 1.0);
          const int x0 = std::min(static_cast<int>(cx), cw - 1);
          const int y0 = std::min(static_cast<int>(cy), ch - 1);
          const int x1 = std::min(x0 + 1, cw - 1);
          const int y1 = std::min(y0 + 1, ch - 1);
          const double ax = cx - x0;
          const double ay = cy - y0;
          up(x, y) = 2.0 * ((1 - ay) * ((1 - ax) * flow(x0, y0) + ax * flow(x1, y0)) +
                            ay * ((1 - ax) * flow(x0, y1) + ax * flow(x1, y1)));
        }
      flow = std::move(up);
    }
    Raster<double> ixx(w, h), ixy(w, h), iyy(w, h);
    Raster<double> gx(w, h), gy(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
        const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
        gx(x, y) = (a(xp, y) - a(xm, y)) / std::max(1, xp - xm);
        gy(x, y) = (a(x, yp) - a(x, ym)) / std::max(1, yp - ym);
        ixx(x, y) = gx(x, y) * gx(x, y);
        ixy(x, y) = gx(x, y) * gy(x, y);
        iyy(x, y) = gy(x, y) * gy(x, y);
      }
    const Raster<double> sxx = detail::box_sum(ixx, radius);
    const Raster<double> sxy = detail::box_sum(ixy, radius);
    const Raster<double> syy = detail::box_sum(iyy, radius);

    // per-pixel Gauss-Newton: the window residual is taken at the centre's own flow
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double det = sxx(x, y) * syy(x, y) - sxy(x, y) * sxy(x, y);
        if (!(std::abs(det) > 1e-18)) continue;
        Eigen::Vector2d u = flow(x, y);
        const int x0 = std::max(x - radius, 0), x1 = std::min(x + radius, w - 1);
        const int y0 = std::max(y - radius, 0), y1 = std::min(y + radius, h - 1);
        for (int it = 0; it < params.iterations; ++it) {
          double bx = 0.0;
          double by = 0.0;
          for (int wy = y0; wy <= y1; ++wy)
            for (int wx = x0; wx <= x1; ++wx) {
              const double diff = detail::sample(b, wx + u.x(), wy + u.y()) - a(wx, wy);
              bx += gx(wx, wy) * diff;
              by += gy(wx, wy) * diff;
            }
          const Eigen::Vector2d d(-(syy(x, y) * bx - sxy(x, y) * by) / det, -(sxx(x, y) * by - sxy(x, y) * bx) / det);
          u += d;
          if (d.squaredNorm() < 1e-6) break;
        }
        flow(x, y) = u;
      }
    if (level == 0) {
      valid = Mask(w, h, 0);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double txx = sxx(x, y) / area;
          const double txy = sxy(x, y) / area;
          const double tyy = syy(x, y) / area;
          const double tr = 0.5 * (txx + tyy);
          const double disc = std::sqrt(std::max(0.0, 0.25 * (txx - tyy) * (txx - tyy) + txy * txy));
          valid(x, y) = (tr - disc) > params.min_eigenvalue ? 1 : 0;
        }
    }
  }
  FlowField out(img1.width(), img1.height(), std::nullopt, Direction::Forward);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      out.data(x, y) = flow(x, y);
      out.valid(x, y) = valid(x, y) && flow(x, y).allFinite() ? 1 : 0;
    }
  return out;
}

}  // namespace rsgeom
