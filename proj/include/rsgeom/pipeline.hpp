#pragma once

// Two-frame RS inversion: optical flows -> middle-scanline correlation maps ->
// undistortion flows -> propagation to any scanline -> forward splatting.

#include <algorithm>
#include <atomic>
#include <exception>
#include <cmath>
#include <optional>
#include <thread>
#include <vector>

#include "rsgeom/geometry.hpp"
#include "rsgeom/warping.hpp"

namespace rsgeom {

struct InversionInput {
  Image rs1;
  Image rs2;
  FlowField forward;   // optical flow RS1 -> RS2
  FlowField backward;  // optical flow RS2 -> RS1
  std::optional<DepthMap> depth1;
  std::optional<DepthMap> depth2;
  CameraModel camera;
  RsTiming timing;

  void validate() const {
    camera.validate();
    timing.validate();
    if (!forward.is_optical_flow() || !backward.is_optical_flow()) {
      fail(ErrorCode::InvalidArgument, "inversion needs optical flows");
    }
    if (forward.direction != Direction::Forward || backward.direction != Direction::Backward) {
      fail(ErrorCode::InvalidArgument, "flow directions are swapped");
    }
    auto fits = [&](int w, int h) { return w == camera.width && h == camera.height; };
    if (!fits(rs1.width(), rs1.height()) || !fits(rs2.width(), rs2.height()) ||
        !fits(forward.width(), forward.height()) || !fits(backward.width(), backward.height()) ||
        (depth1 && !fits(depth1->width(), depth1->height())) || (depth2 && !fits(depth2->width(), depth2->height()))) {
      fail(ErrorCode::DimensionMismatch, "inversion inputs do not match the camera");
    }
  }
};

struct InversionOptions {
  // Propagation parameters per direction; empty means the constant-velocity model.
  std::optional<double> phi_forward;
  std::optional<double> phi_backward;
  SplatConfig splat;
  bool splat_weights_from_depth = true;  // InverseDepth when depth is present, Brightness otherwise
};

struct MiddleFlows {
  FlowField forward;   // U_{1->m}
  FlowField backward;  // U_{2->m}
};

inline MiddleFlows middle_undistortion_flows(const InversionInput& in) {
  const double m = in.camera.middle_scanline();
  return {undistortion_from_flow(in.forward, correlation_map_from_flow(in.forward, in.timing, in.camera, m)),
          undistortion_from_flow(in.backward, correlation_map_from_flow(in.backward, in.timing, in.camera, m))};
}

/// Undistortion flow towards scanline s obtained by propagating u_mid. Rows
/// where the propagation ratio has a pole (the source row of u_mid itself)
/// are filled from the optical flow: the limit of the propagated value,
/// g(s - eta)(2h + phi(s - eta)) / (2h^2) * f / alpha.
inline FlowField undistortion_flow_at(const FlowField& u_mid, const FlowField& optical, double s,
                                      std::optional<double> phi, const CameraModel& camera, const RsTiming& timing) {
  FlowField out = propagate(u_mid, s, phi, camera);
  if (s == *u_mid.target_scanline) return out;
  const double h = camera.h();
  const double g = timing.signed_gamma(optical.direction);
  const double p = phi.value_or(0.0);
  const double s1 = *u_mid.target_scanline;
  for (int y = 0; y < camera.height; ++y) {
    if (std::abs(s1 - y) > kRowPoleTol) continue;
    const double d = s - y;
    const double scale = g * d * (2.0 * h + p * d) / (2.0 * h * h);
    for (int x = 0; x < camera.width; ++x) {
      const double alpha = interpolation_factor(optical.data(x, y).y(), timing, camera, optical.direction);
      const bool ok = optical.valid(x, y) && std::abs(alpha) > kSingularityRelTol;
      out.valid(x, y) = ok ? 1 : 0;
      out.data(x, y) = ok ? Eigen::Vector2d(scale * optical.data(x, y) / alpha) : Eigen::Vector2d::Zero();
    }
  }
  return out;
}

struct SplatWeights {
  std::optional<Raster<double>> forward;
  std::optional<Raster<double>> backward;
};

inline SplatWeights splat_weights(const InversionInput& in, const InversionOptions& opt) {
  SplatWeights w;
  if (opt.splat.weight_mode == WeightMode::Uniform) return w;
  const bool depth_mode = opt.splat_weights_from_depth && in.depth1 && in.depth2;
  if (opt.splat.weight_mode == WeightMode::InverseDepth && depth_mode) {
    w.forward = inverse_depth_weights(*in.depth1);
    w.backward = inverse_depth_weights(*in.depth2);
  } else {
    w.forward = brightness_weights(in.rs1, in.rs2, in.forward);
    w.backward = brightness_weights(in.rs2, in.rs1, in.backward);
  }
  return w;
}

struct GsEstimate {
  double scanline = 0.0;
  SplatResult forward;   // from RS1
  SplatResult backward;  // from RS2
};

inline GsEstimate invert_at(const InversionInput& in, const MiddleFlows& mid, const SplatWeights& weights, double s,
                            const InversionOptions& opt) {
  if (!(s >= 0.0 && s <= in.camera.h() - 1.0)) fail(ErrorCode::InvalidArgument, "scanline outside [0, h-1]");
  const FlowField u1 = undistortion_flow_at(mid.forward, in.forward, s, opt.phi_forward, in.camera, in.timing);
  const FlowField u2 = undistortion_flow_at(mid.backward, in.backward, s, opt.phi_backward, in.camera, in.timing);
  GsEstimate est;
  est.scanline = s;
  est.forward = splat_forward(in.rs1, u1, weights.forward ? &*weights.forward : nullptr, opt.splat);
  est.backward = splat_forward(in.rs2, u2, weights.backward ? &*weights.backward : nullptr, opt.splat);
  return est;
}

/// `count` evenly spaced scanlines covering [0, h-1].
inline std::vector<double> scanline_grid(int count, const CameraModel& camera) {
  if (count < 1) fail(ErrorCode::InvalidArgument, "scanline count must be positive");
  if (count == 1) return {camera.middle_scanline()};
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) out[i] = (camera.h() - 1.0) * i / (count - 1);
  return out;
}

/// Inverts at every requested scanline. Each scanline is independent, so they
/// are spread over `threads` workers; results keep the input order.
inline std::vector<GsEstimate> invert(const InversionInput& in, const std::vector<double>& scanlines,
                                      const InversionOptions& opt, unsigned threads = 1) {
  in.validate();
  opt.splat.validate();
  const MiddleFlows mid = middle_undistortion_flows(in);
  const SplatWeights weights = splat_weights(in, opt);
  std::vector<GsEstimate> out(scanlines.size());
  threads = std::clamp<unsigned>(threads, 1u, static_cast<unsigned>(std::max<std::size_t>(1, scanlines.size())));
  if (threads == 1) {
    for (std::size_t i = 0; i < scanlines.size(); ++i) out[i] = invert_at(in, mid, weights, scanlines[i], opt);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < scanlines.size(); i = next++) {
          out[i] = invert_at(in, mid, weights, scanlines[i], opt);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace rsgeom
