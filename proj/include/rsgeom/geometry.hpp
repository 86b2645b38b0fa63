#pragma once

// Closed-form differential rolling-shutter geometry: motion field, scanline
// pose interpolation, RS-aware flow / undistortion-flow factors, correlation
// maps and cross-scanline propagation.
//
// Conventions used throughout:
//   * pixels are (column, row); geometry works on offsets from the principal
//     point with the focal length in pixels;
//   * scanlines are zero based, row 0 is exposed first, eta is the integer row
//     of a source pixel and s a real-valued target scanline in [0, h-1];
//   * the stored readout ratio gamma is positive, Backward operations negate it.

#include <cmath>
#include <concepts>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "rsgeom/error.hpp"
#include "rsgeom/raster.hpp"

namespace rsgeom {

enum class Direction { Forward, Backward };

constexpr const char* to_string(Direction d) { return d == Direction::Forward ? "forward" : "backward"; }

struct CameraModel {
  double focal_length = 0.0;
  Eigen::Vector2d principal_point = Eigen::Vector2d::Zero();
  int width = 0;
  int height = 0;  // number of scanlines h

  static CameraModel centered(int width, int height, double focal_length) {
    return {focal_length, {0.5 * (width - 1), 0.5 * (height - 1)}, width, height};
  }

  double h() const noexcept { return static_cast<double>(height); }
  double middle_scanline() const noexcept { return 0.5 * height; }

  void validate() const {
    if (!(focal_length > 0.0)) fail(ErrorCode::InvalidArgument, "focal length must be positive");
    if (width < 2 || height < 2) fail(ErrorCode::InvalidArgument, "camera needs width, height >= 2");
    const auto& c = principal_point;
    if (!(c.x() >= 0.0 && c.y() >= 0.0 && c.x() <= width - 1 && c.y() <= height - 1)) {
      fail(ErrorCode::InvalidArgument, "principal point outside the image");
    }
  }
};

struct RsTiming {
  double gamma = 1.0;  // readout time ratio, (0, 1]

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) fail(ErrorCode::InvalidArgument, "gamma must lie in (0, 1]");
  }
  double signed_gamma(Direction d) const noexcept { return d == Direction::Forward ? gamma : -gamma; }
};

/// Inter-frame linear and angular velocity (per frame interval).
struct CameraVelocity {
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();

  CameraVelocity reversed() const { return {-v, -omega}; }
  CameraVelocity scaled(double s) const { return {s * v, s * omega}; }
  CameraVelocity for_direction(Direction d) const { return d == Direction::Forward ? *this : reversed(); }
};

struct MotionState {
  CameraVelocity velocity;
  double k = 0.0;  // acceleration factor; 0 is the constant-velocity model
};

struct DepthMap {
  Raster<double> z;
  Mask valid;

  DepthMap() = default;
  DepthMap(int width, int height, double fill = 1.0) : z(width, height, fill), valid(width, height, 1) {}

  int width() const noexcept { return z.width(); }
  int height() const noexcept { return z.height(); }
  bool usable(int x, int y) const { return valid(x, y) && z(x, y) > 0.0 && std::isfinite(z(x, y)); }
};

/// Dense per-pixel 2-vector field: optical flow when target_scanline is empty,
/// otherwise an undistortion flow towards that scanline.
struct FlowField {
  Raster<Eigen::Vector2d> data;
  Mask valid;
  std::optional<double> target_scanline;
  Direction direction = Direction::Forward;

  FlowField() = default;
  FlowField(int width, int height, std::optional<double> target, Direction dir)
      : data(width, height, Eigen::Vector2d::Zero()), valid(width, height, 1), target_scanline(target), direction(dir) {}

  int width() const noexcept { return data.width(); }
  int height() const noexcept { return data.height(); }
  bool is_optical_flow() const noexcept { return !target_scanline.has_value(); }
};

struct CorrelationMap {
  Raster<double> values;
  Mask valid;
  double target_scanline = 0.0;
  Direction direction = Direction::Forward;

  int width() const noexcept { return values.width(); }
  int height() const noexcept { return values.height(); }
};

/// Tolerances for the two singular configurations of the model.
inline constexpr double kSingularityRelTol = 1e-6;  // |h - gamma*pi_v| guard, relative to h
inline constexpr double kRowPoleTol = 1e-6;         // |s1 - eta| guard, scanlines
inline constexpr double kMinAcceleration = -1.9;
inline constexpr double kMaxAcceleration = 10.0;

// ---------------------------------------------------------------------------
// Raw formulas. The public operations below dispatch between them; they are
// exposed so the reductions (acceleration -> velocity) can be checked directly.
namespace closed_form {

template <std::floating_point T>
T time_weight_velocity(T t) {
  return t;
}

/// Quadratic pose interpolation of the constant-acceleration model, t in
/// frame intervals since the first scanline of frame 1.
template <std::floating_point T>
T time_weight_acceleration(T t, T k) {
  if (k == T(-2)) fail(ErrorCode::DegenerateAcceleration, "k = -2");
  return T(2) / (k + T(2)) * (t + k / T(2) * t * t);
}

template <std::floating_point T>
T undistortion_factor_velocity(T s, T eta, T signed_gamma, T h) {
  return signed_gamma * (s - eta) / h;
}

template <std::floating_point T>
T undistortion_factor_acceleration(T s, T eta, T signed_gamma, T h, T k) {
  if (k == T(-2)) fail(ErrorCode::DegenerateAcceleration, "k = -2");
  return signed_gamma * (s - eta) / h * (T(2) * h + k * signed_gamma * (s - eta)) / (h * (k + T(2)));
}

template <std::floating_point T>
T velocity_propagation_ratio(T s1, T s2, T eta) {
  return (s2 - eta) / (s1 - eta);
}

template <std::floating_point T>
T acceleration_propagation_ratio(T s1, T s2, T eta, T phi, T h) {
  return (s2 - eta) * (T(2) * h + phi * (s2 - eta)) / ((s1 - eta) * (T(2) * h + phi * (s1 - eta)));
}

template <std::floating_point T>
T correlation_factor(T s, T eta, T signed_gamma, T h, T pi_v) {
#ifdef RSGEOM_MUTATION_FLIP_CORRELATION_SIGN
  return -signed_gamma * (s - eta) * (h - signed_gamma * pi_v) / (h * h);
#else
  return signed_gamma * (s - eta) * (h - signed_gamma * pi_v) / (h * h);
#endif
}

/// The two-factor split used to bound the middle-scanline map.
template <std::floating_point T>
std::pair<T, T> correlation_factor_decomposed(T s, T eta, T signed_gamma, T h, T pi_v) {
  return {(s - eta) / h, signed_gamma * (h - signed_gamma * pi_v) / h};
}

}  // namespace closed_form

// ---------------------------------------------------------------------------
// Motion field

/// Instantaneous image motion of a point at `pixel` with depth `depth` under
/// camera velocity (v, omega): A v / Z + B omega.
inline Eigen::Vector2d motion_field(const CameraModel& camera, const CameraVelocity& vel,
                                    const Eigen::Vector2d& pixel, double depth) {
  if (!(depth > 0.0)) fail(ErrorCode::NonPositiveDepth, "depth must be positive");
  const double f = camera.focal_length;
  const double x = pixel.x() - camera.principal_point.x();
  const double y = pixel.y() - camera.principal_point.y();
  const Eigen::Vector3d& v = vel.v;
  const Eigen::Vector3d& w = vel.omega;
  const double tu = (-f * v.x() + x * v.z()) / depth;
  const double tv = (-f * v.y() + y * v.z()) / depth;
  const double ru = x * y / f * w.x() - (f + x * x / f) * w.y() + y * w.z();
  const double rv = (f + y * y / f) * w.x() - x * y / f * w.y() - x * w.z();
  return {tu + ru, tv + rv};
}

// ---------------------------------------------------------------------------
// Scanline timing

/// Pose weight lambda of scanline `s` of frame 1 or 2 relative to the first
/// scanline of frame 1.
inline double scanline_time_weight(int frame, double s, const RsTiming& timing, const CameraModel& camera,
                                   double k) {
  if (frame != 1 && frame != 2) fail(ErrorCode::InvalidArgument, "frame must be 1 or 2");
  const double t = (frame - 1) + timing.gamma * s / camera.h();
  if (k == 0.0) return closed_form::time_weight_velocity(t);
  return closed_form::time_weight_acceleration(t, k);
}

/// Relative motion between scanline s1 of frame 1 and scanline s2 of frame 2.
inline CameraVelocity relative_scanline_motion(double s1, double s2, const MotionState& motion,
                                               const RsTiming& timing, const CameraModel& camera) {
  const double d = scanline_time_weight(2, s2, timing, camera, motion.k) -
                   scanline_time_weight(1, s1, timing, camera, motion.k);
  return motion.velocity.scaled(d);
}

/// RS-aware interpolation factor: 1 + gamma f_v / h forward, 1 - gamma f_v' / h backward.
inline double interpolation_factor(double flow_v, const RsTiming& timing, const CameraModel& camera,
                                   Direction direction) {
  return 1.0 + timing.signed_gamma(direction) * flow_v / camera.h();
}

/// Optical flow of a pixel between consecutive RS frames with the vertical
/// flow eliminated: h / (h - gamma pi_v) * pi. Backward uses the reversed
/// velocity and negated gamma.
inline Eigen::Vector2d rs_flow_closed_form(const CameraModel& camera, const CameraVelocity& vel,
                                           const RsTiming& timing, const Eigen::Vector2d& pixel, double depth,
                                           Direction direction) {
  const Eigen::Vector2d pi = motion_field(camera, vel.for_direction(direction), pixel, depth);
  const double h = camera.h();
  const double denom = h - timing.signed_gamma(direction) * pi.y();
  if (std::abs(denom) <= kSingularityRelTol * h) {
    fail(ErrorCode::InterpolationSingularity, "h - gamma*pi_v vanishes");
  }
  return (h / denom) * pi;
}

// ---------------------------------------------------------------------------
// Undistortion

inline double undistortion_factor(double s, double eta, const RsTiming& timing, const CameraModel& camera,
                                  Direction direction, double k) {
  const double g = timing.signed_gamma(direction);
  if (k == 0.0) return closed_form::undistortion_factor_velocity(s, eta, g, camera.h());
  return closed_form::undistortion_factor_acceleration(s, eta, g, camera.h(), k);
}

/// Dense undistortion flow from known motion and depth; pixels with unusable
/// depth are invalid.
inline FlowField undistortion_flow_from_geometry(const CameraModel& camera, const MotionState& motion,
                                                 const RsTiming& timing, const DepthMap& depth, double s,
                                                 Direction direction) {
  if (depth.width() != camera.width || depth.height() != camera.height) {
    fail(ErrorCode::DimensionMismatch, "depth map does not match camera");
  }
  if (motion.k == -2.0) fail(ErrorCode::DegenerateAcceleration, "k = -2");
  FlowField out(camera.width, camera.height, s, direction);
  const CameraVelocity vel = motion.velocity.for_direction(direction);
  for (int y = 0; y < camera.height; ++y) {
    const double beta = undistortion_factor(s, y, timing, camera, direction, motion.k);
    for (int x = 0; x < camera.width; ++x) {
      if (!depth.usable(x, y)) {
        out.valid(x, y) = 0;
        continue;
      }
      out.data(x, y) = beta * motion_field(camera, vel, {x, y}, depth.z(x, y));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Correlation factor and maps

/// Scalar c with undistortion flow = c * optical flow.
inline double correlation_factor(double s, double eta, const RsTiming& timing, const CameraModel& camera,
                                 double pi_v, Direction direction) {
  return closed_form::correlation_factor(s, eta, timing.signed_gamma(direction), camera.h(), pi_v);
}

inline FlowField undistortion_from_flow(const FlowField& flow, const CorrelationMap& corr) {
  if (!flow.data.same_shape(corr.values)) fail(ErrorCode::DimensionMismatch, "flow vs correlation map");
  if (flow.direction != corr.direction) fail(ErrorCode::InvalidArgument, "flow and map directions differ");
  FlowField out(flow.width(), flow.height(), corr.target_scanline, flow.direction);
  for (int y = 0; y < flow.height(); ++y) {
    for (int x = 0; x < flow.width(); ++x) {
      const bool ok = flow.valid(x, y) && corr.valid(x, y);
      out.valid(x, y) = ok ? 1 : 0;
      if (ok) out.data(x, y) = corr.values(x, y) * flow.data(x, y);
    }
  }
  return out;
}

inline CorrelationMap correlation_map_from_geometry(const CameraModel& camera, const CameraVelocity& vel,
                                                    const RsTiming& timing, const DepthMap& depth, double s,
                                                    Direction direction) {
  if (depth.width() != camera.width || depth.height() != camera.height) {
    fail(ErrorCode::DimensionMismatch, "depth map does not match camera");
  }
  CorrelationMap map{Raster<double>(camera.width, camera.height, 0.0), Mask(camera.width, camera.height, 1), s,
                     direction};
  const CameraVelocity dv = vel.for_direction(direction);
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      if (!depth.usable(x, y)) {
        map.valid(x, y) = 0;
        continue;
      }
      const double pi_v = motion_field(camera, dv, {x, y}, depth.z(x, y)).y();
      map.values(x, y) = correlation_factor(s, y, timing, camera, pi_v, direction);
    }
  }
  return map;
}

/// Correlation map recovered from the optical flow alone: the closed-form
/// flow is inverted for pi_v = h f_v / (h + gamma f_v), so no depth or motion
/// is needed. Pixels where that inversion is singular are invalid.
inline CorrelationMap correlation_map_from_flow(const FlowField& flow, const RsTiming& timing,
                                                const CameraModel& camera, double s) {
  if (!flow.is_optical_flow()) fail(ErrorCode::InvalidArgument, "expected an optical flow");
  if (flow.width() != camera.width || flow.height() != camera.height) {
    fail(ErrorCode::DimensionMismatch, "flow does not match camera");
  }
  const double h = camera.h();
  const double g = timing.signed_gamma(flow.direction);
  CorrelationMap map{Raster<double>(camera.width, camera.height, 0.0), Mask(camera.width, camera.height, 1), s,
                     flow.direction};
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const double denom = h + g * flow.data(x, y).y();
      if (!flow.valid(x, y) || std::abs(denom) <= kSingularityRelTol * h) {
        map.valid(x, y) = 0;
        continue;
      }
      const double pi_v = h * flow.data(x, y).y() / denom;
      map.values(x, y) = correlation_factor(s, y, timing, camera, pi_v, flow.direction);
    }
  }
  return map;
}

struct BoundsReport {
  std::size_t violations = 0;
  std::vector<int> rows;  // rows holding at least one violation, ascending
};

/// Checks the sign / magnitude structure of a middle-scanline correlation map:
/// forward maps lie in (0,1) above the middle row, are 0 on it and lie in
/// (-1,0) below it; backward maps mirror the signs. With `closed_intervals`
/// a zero entry off the middle row is admitted.
inline BoundsReport validate_correlation_bounds(const CorrelationMap& map, bool closed_intervals = false) {
  const double middle = 0.5 * map.height();
  if (map.target_scanline != middle) {
    fail(ErrorCode::WrongTargetScanline, "bounds only hold for target scanline h/2");
  }
  BoundsReport report;
  for (int y = 0; y < map.height(); ++y) {
    // +1: (0,1), -1: (-1,0), 0: exactly zero
    int sign = y < middle ? 1 : (y > middle ? -1 : 0);
    if (map.direction == Direction::Backward) sign = -sign;
    std::size_t row_violations = 0;
    for (int x = 0; x < map.width(); ++x) {
      if (!map.valid(x, y)) continue;
      const double c = map.values(x, y);
      bool ok = false;
      if (sign == 0) {
        ok = c == 0.0;
      } else if (sign > 0) {
        ok = (closed_intervals ? c >= 0.0 : c > 0.0) && c < 1.0;
      } else {
        ok = (closed_intervals ? c <= 0.0 : c < 0.0) && c > -1.0;
      }
      if (!std::isfinite(c)) ok = false;
      if (!ok) ++row_violations;
    }
    if (row_violations > 0) {
      report.violations += row_violations;
      report.rows.push_back(y);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Propagation between target scanlines

/// Rescales an undistortion flow towards scanline s1 into one towards s2.
/// Without phi (or with phi == 0) the constant-velocity ratio is used,
/// otherwise the constant-acceleration ratio with phi = k * signed gamma.
/// Pixels on rows where the ratio has a pole become invalid.
inline FlowField propagate(const FlowField& flow, double s2, std::optional<double> phi, const CameraModel& camera) {
  if (flow.is_optical_flow()) fail(ErrorCode::InvalidArgument, "propagate expects an undistortion flow");
  if (flow.width() != camera.width || flow.height() != camera.height) {
    fail(ErrorCode::DimensionMismatch, "flow does not match camera");
  }
  const double s1 = *flow.target_scanline;
  if (s2 == s1) return flow;
  const double h = camera.h();
  const bool velocity = !phi.has_value() || *phi == 0.0;
  FlowField out(flow.width(), flow.height(), s2, flow.direction);
  for (int y = 0; y < flow.height(); ++y) {
    const double eta = y;
    bool pole = std::abs(s1 - eta) <= kRowPoleTol;
    double ratio = 0.0;
    if (!pole) {
      if (velocity) {
        ratio = closed_form::velocity_propagation_ratio(s1, s2, eta);
      } else {
        const double den = 2.0 * h + *phi * (s1 - eta);
        pole = std::abs(den) <= kSingularityRelTol * h;
        if (!pole) ratio = closed_form::acceleration_propagation_ratio(s1, s2, eta, *phi, h);
      }
    }
    for (int x = 0; x < flow.width(); ++x) {
      if (pole || !flow.valid(x, y)) {
        out.valid(x, y) = 0;
        continue;
      }
      out.data(x, y) = ratio * flow.data(x, y);
    }
  }
  return out;
}

}  // namespace rsgeom
