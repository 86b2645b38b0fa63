#pragma once

#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <vector>

#include "rsgeom/geometry.hpp"
#include "rsgeom/raster.hpp"

namespace rsgeom {

enum class WeightMode { Uniform, InverseDepth, Brightness };
enum class HolePolicy { MarkInvalid, NearestFill };

struct SplatConfig {
  WeightMode weight_mode = WeightMode::InverseDepth;
  double sharpness = 10.0;  // softmax temperature applied to the per-pixel weights
  HolePolicy hole_policy = HolePolicy::MarkInvalid;

  void validate() const {
    if (!(sharpness > 0.0)) fail(ErrorCode::InvalidArgument, "splat sharpness must be positive");
  }
};

struct SplatResult {
  Image image;
  Mask valid;           // destinations that received mass
  Raster<double> mass;  // accumulated bilinear * softmax weight
};

/// Importance for InverseDepth splatting: z_min / z, in (0, 1], so nearer
/// surfaces dominate collisions.
inline Raster<double> inverse_depth_weights(const DepthMap& depth) {
  double zmin = std::numeric_limits<double>::infinity();
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x)
      if (depth.usable(x, y)) zmin = std::min(zmin, depth.z(x, y));
  Raster<double> w(depth.width(), depth.height(), 0.0);
  if (!std::isfinite(zmin)) return w;
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x)
      if (depth.usable(x, y)) w(x, y) = zmin / depth.z(x, y);
  return w;
}

/// Importance for Brightness splatting: negated brightness-constancy residual
/// |I(x) - I_other(x + F(x))| of the optical flow F from src to other.
inline Raster<double> brightness_weights(const Image& src, const Image& other, const FlowField& optical_flow) {
  if (!src.same_shape(other) || !src.same_extent(optical_flow.data)) {
    fail(ErrorCode::DimensionMismatch, "brightness_weights");
  }
  const Raster<float> a = to_gray(src);
  const Image b_img = [&] {
    Image g(other.width(), other.height(), 1);
    const Raster<float> gray = to_gray(other);
    for (int y = 0; y < g.height(); ++y)
      for (int x = 0; x < g.width(); ++x) g.at(x, y, 0) = gray(x, y);
    return g;
  }();
  Raster<double> w(src.width(), src.height(), -1.0);
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < src.width(); ++x) {
      if (!optical_flow.valid(x, y)) continue;
      float v = 0.0f;
      b_img.sample_bilinear(x + optical_flow.data(x, y).x(), y + optical_flow.data(x, y).y(), &v);
      w(x, y) = -std::abs(static_cast<double>(a(x, y)) - v);
    }
  }
  return w;
}

namespace detail {

/// Fills invalid pixels with the colour of the nearest valid one (8-connected
/// breadth-first order, ties resolved by scan order).
inline void nearest_fill(Image& img, const Mask& valid) {
  const int w = img.width();
  const int h = img.height();
  Mask done = valid;
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (done(x, y)) queue.emplace_back(x, y);
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx;
        const int ny = y + dy;
        if (!done.contains(nx, ny) || done(nx, ny)) continue;
        done(nx, ny) = 1;
        for (int c = 0; c < img.channels(); ++c) img.at(nx, ny, c) = img.at(x, y, c);
        queue.emplace_back(nx, ny);
      }
    }
  }
}

}  // namespace detail

/// Forward (scatter) warp of `src` by `flow`. Every valid source pixel is
/// spread bilinearly over the four neighbours of x + u; collisions are blended
/// with weights exp(sharpness * w) (all equal when `weights` is absent).
/// Accumulation is in double and the traversal order is fixed, so the result
/// is deterministic.
inline SplatResult splat_forward(const Image& src, const FlowField& flow, const Raster<double>* weights,
                                 const SplatConfig& config) {
  config.validate();
  if (!src.same_extent(flow.data)) fail(ErrorCode::DimensionMismatch, "splat: image vs flow");
  if (weights != nullptr && !weights->same_shape(flow.data)) fail(ErrorCode::DimensionMismatch, "splat: weights");
  const int w = src.width();
  const int h = src.height();
  const int nc = src.channels();

  double wmax = 0.0;
  if (weights != nullptr) {
    wmax = -std::numeric_limits<double>::infinity();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (flow.valid(x, y)) wmax = std::max(wmax, (*weights)(x, y));
    if (!std::isfinite(wmax)) wmax = 0.0;
  }

  std::vector<double> accum(static_cast<std::size_t>(w) * h * nc, 0.0);
  SplatResult out{Image(w, h, nc), Mask(w, h, 0), Raster<double>(w, h, 0.0)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!flow.valid(x, y)) continue;
      const Eigen::Vector2d& u = flow.data(x, y);
      const double qx = x + u.x();
      const double qy = y + u.y();
      if (!std::isfinite(qx) || !std::isfinite(qy)) continue;
      const double fx = std::floor(qx);
      const double fy = std::floor(qy);
      if (fx < -1.0 || fy < -1.0 || fx >= w || fy >= h) continue;
      const int x0 = static_cast<int>(fx);
      const int y0 = static_cast<int>(fy);
      const double ax = qx - fx;
      const double ay = qy - fy;
      const double e = weights != nullptr ? std::exp(config.sharpness * ((*weights)(x, y) - wmax)) : 1.0;
      const std::array<double, 4> bw{(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
      const float* color = src.pixel(x, y);
      for (int i = 0; i < 4; ++i) {
        const int tx = x0 + (i & 1);
        const int ty = y0 + (i >> 1);
        if (bw[i] <= 0.0 || tx < 0 || ty < 0 || tx >= w || ty >= h) continue;
        const double m = bw[i] * e;
        out.mass(tx, ty) += m;
        double* acc = accum.data() + (static_cast<std::size_t>(ty) * w + tx) * nc;
        for (int c = 0; c < nc; ++c) acc[c] += m * color[c];
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double m = out.mass(x, y);
      if (!(m > 0.0)) continue;
      out.valid(x, y) = 1;
      const double* acc = accum.data() + (static_cast<std::size_t>(y) * w + x) * nc;
      for (int c = 0; c < nc; ++c) out.image.at(x, y, c) = static_cast<float>(acc[c] / m);
    }
  }
  if (config.hole_policy == HolePolicy::NearestFill) detail::nearest_fill(out.image, out.valid);
  return out;
}

struct WarpResult {
  Image image;
  Mask in_bounds;  // false where the sample was clamped or the flow was invalid
};

/// Backward (gather) warp: out(x) = src(x + flow(x)), bilinear, clamp-to-edge.
inline WarpResult backward_warp(const Image& src, const FlowField& flow) {
  if (!src.same_extent(flow.data)) fail(ErrorCode::DimensionMismatch, "backward_warp: image vs flow");
  const int w = src.width();
  const int h = src.height();
  WarpResult out{Image(w, h, src.channels()), Mask(w, h, 1)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sx = x;
      double sy = y;
      if (flow.valid(x, y)) {
        sx += flow.data(x, y).x();
        sy += flow.data(x, y).y();
      } else {
        out.in_bounds(x, y) = 0;
      }
      if (sx < 0.0 || sy < 0.0 || sx > w - 1 || sy > h - 1) out.in_bounds(x, y) = 0;
      src.sample_bilinear(sx, sy, out.image.pixel(x, y));
    }
  }
  return out;
}

}  // namespace rsgeom
