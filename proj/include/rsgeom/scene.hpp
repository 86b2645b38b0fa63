#pragma once

// Synthetic textured-plane scenes: global-shutter rendering at any scanline
// pose, row-by-row rolling-shutter composition and ground-truth flows, depth
// and occlusion.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

#include <Eigen/Geometry>

#include "rsgeom/geometry.hpp"
#include "rsgeom/raster.hpp"

namespace rsgeom {

/// Texture painted on the plane. Texel (origin + p) is what the reference
/// camera (pose weight 0) sees at pixel p; lookups outside the raster are
/// mirrored and reported as out of extent.
struct Texture {
  Image image;
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();

  /// Returns false when (x, y) needed mirroring.
  bool sample(double x, double y, float* out) const {
    double u = x + origin.x();
    double v = y + origin.y();
    const double wmax = image.width() - 1;
    const double hmax = image.height() - 1;
    const bool inside = u >= 0.0 && v >= 0.0 && u <= wmax && v <= hmax;
    if (!inside) {
      u = reflect(u, wmax);
      v = reflect(v, hmax);
    }
    image.sample_bilinear(u, v, out);
    return inside;
  }

 private:
  static double reflect(double a, double max) {
    if (max <= 0.0) return 0.0;
    const double period = 2.0 * max;
    a = std::fmod(std::abs(a), period);
    return a > max ? period - a : a;
  }
};

/// Smooth multi-octave value noise, RGB, covering the image plus `margin`
/// pixels on every side.
inline Texture procedural_texture(int width, int height, int margin, std::uint32_t seed) {
  const int tw = width + 2 * margin;
  const int th = height + 2 * margin;
  struct Octave {
    int spacing;
    float amplitude;
  };
  constexpr std::array<Octave, 3> octaves{{{32, 0.45f}, {16, 0.33f}, {8, 0.22f}}};
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> uni(0.0f, 1.0f);

  // one lattice per (octave, layer); layer 0 is shared luminance, 1..3 tint
  auto lattice_noise = [&](int spacing) {
    const int lw = tw / spacing + 3;
    const int lh = th / spacing + 3;
    Raster<float> lat(lw, lh);
    for (auto& v : lat.data()) v = uni(rng);
    Raster<float> out(tw, th);
    auto smooth = [](float t) { return t * t * (3.0f - 2.0f * t); };
    for (int y = 0; y < th; ++y) {
      const int gy = y / spacing;
      const float fy = smooth(static_cast<float>(y % spacing) / spacing);
      for (int x = 0; x < tw; ++x) {
        const int gx = x / spacing;
        const float fx = smooth(static_cast<float>(x % spacing) / spacing);
        const float top = lat(gx, gy) + fx * (lat(gx + 1, gy) - lat(gx, gy));
        const float bot = lat(gx, gy + 1) + fx * (lat(gx + 1, gy + 1) - lat(gx, gy + 1));
        out(x, y) = top + fy * (bot - top);
      }
    }
    return out;
  };

  std::array<Raster<float>, 4> layers;
  for (auto& layer : layers) {
    layer = Raster<float>(tw, th, 0.0f);
    for (const auto& oct : octaves) {
      const Raster<float> n = lattice_noise(oct.spacing);
      for (std::size_t i = 0; i < layer.size(); ++i) layer.data()[i] += oct.amplitude * n.data()[i];
    }
  }
  Texture tex{Image(tw, th, 3), {static_cast<double>(margin), static_cast<double>(margin)}};
  for (int y = 0; y < th; ++y) {
    for (int x = 0; x < tw; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = 0.65f * layers[0](x, y) + 0.35f * layers[c + 1](x, y);
        tex.image.at(x, y, c) = 0.1f + 0.8f * v;
      }
    }
  }
  return tex;
}

/// Plane Z = z0 + dz_dx * X + dz_dy * Y in reference-camera coordinates;
/// dz_dx = dz_dy = 0 is a fronto-parallel plane.
struct ScenePlane {
  double z0 = 10.0;
  double dz_dx = 0.0;
  double dz_dy = 0.0;

  Eigen::Vector3d normal() const { return {-dz_dx, -dz_dy, 1.0}; }

  /// Depth seen by the reference camera at pixel offset (x, y).
  double reference_depth(double x, double y, double f) const { return z0 / (1.0 - dz_dx * x / f - dz_dy * y / f); }
};

struct Scene {
  Texture texture;
  ScenePlane plane;
  CameraModel camera;
  RsTiming timing;
  MotionState motion;
  int frame_count = 2;

  /// Checks the camera, the timing, the plane in front of the reference camera and
  /// |gamma * pi_v| < h at every pixel.
  void validate() const {
    camera.validate();
    timing.validate();
    if (frame_count < 2) fail(ErrorCode::InvalidArgument, "scene needs at least 2 frames");
    if (motion.k < kMinAcceleration || motion.k > kMaxAcceleration) {
      fail(ErrorCode::InvalidArgument, "acceleration factor outside [-1.9, 10]");
    }
    if (texture.image.empty()) fail(ErrorCode::InvalidArgument, "scene has no texture");
    const double f = camera.focal_length;
    for (int y = 0; y < camera.height; ++y) {
      for (int x = 0; x < camera.width; ++x) {
        const Eigen::Vector2d off = Eigen::Vector2d(x, y) - camera.principal_point;
        const double z = plane.reference_depth(off.x(), off.y(), f);
        if (!(z > 0.0) || !std::isfinite(z)) fail(ErrorCode::PlaneBehindCamera, "plane not in front of camera");
        const double pv = motion_field(camera, motion.velocity, {x, y}, z).y();
        if (!(std::abs(timing.gamma * pv) < camera.h())) {
          fail(ErrorCode::InvalidArgument, "motion too large: |gamma * pi_v| >= h");
        }
      }
    }
  }
};

/// Pose weight of scanline s of frame n (1-based), continuing the
/// single-pair timeline: t = (n - 1) + gamma s / h.
inline double pose_weight(const Scene& scene, int frame, double s) {
  const double t = (frame - 1) + scene.timing.gamma * s / scene.camera.h();
  if (scene.motion.k == 0.0) return closed_form::time_weight_velocity(t);
  return closed_form::time_weight_acceleration(t, scene.motion.k);
}

/// Camera at pose weight lambda: centre lambda*v, orientation exp(lambda [omega]x),
/// so a reference point X is seen at R^T (X - centre).
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d centre = Eigen::Vector3d::Zero();

  static CameraPose at(const CameraVelocity& vel, double lambda) {
    CameraPose p;
    p.centre = lambda * vel.v;
    const double angle = lambda * vel.omega.norm();
    if (angle != 0.0) p.rotation = Eigen::AngleAxisd(angle, vel.omega.normalized()).toRotationMatrix();
    return p;
  }

  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const { return rotation.transpose() * (world - centre); }
};

namespace detail {

struct RayHit {
  Eigen::Vector3d point;  // reference coordinates
  double depth = 0.0;     // along the optical axis of the casting camera
  bool ok = false;
};

inline RayHit cast_ray(const Scene& scene, const CameraPose& pose, double px, double py) {
  const CameraModel& cam = scene.camera;
  const Eigen::Vector3d d_cam(px - cam.principal_point.x(), py - cam.principal_point.y(), cam.focal_length);
  const Eigen::Vector3d d = pose.rotation * d_cam;
  const Eigen::Vector3d n = scene.plane.normal();
  const double denom = n.dot(d);
  RayHit hit;
  if (denom == 0.0) return hit;
  const double t = (scene.plane.z0 - n.dot(pose.centre)) / denom;
  hit.point = pose.centre + t * d;
  hit.depth = t * cam.focal_length;
  hit.ok = t > 0.0 && hit.point.z() > 0.0;
  return hit;
}

/// Projects a reference-space point with the reference camera; returns pixel coordinates.
inline Eigen::Vector2d project(const CameraModel& cam, const Eigen::Vector3d& p) {
  return {cam.focal_length * p.x() / p.z() + cam.principal_point.x(),
          cam.focal_length * p.y() / p.z() + cam.principal_point.y()};
}

struct RowOutput {
  Image* image;
  DepthMap* depth;
  Mask* no_source;
};

/// Renders row `y` of the view from `pose` into the outputs.
inline void render_row(const Scene& scene, const CameraPose& pose, int y, RowOutput out) {
  for (int x = 0; x < scene.camera.width; ++x) {
    const RayHit hit = cast_ray(scene, pose, x, y);
    if (!hit.ok) fail(ErrorCode::PlaneBehindCamera, "plane behind camera");
    const Eigen::Vector2d tex = project(scene.camera, hit.point);
    const bool inside = scene.texture.sample(tex.x(), tex.y(), out.image->pixel(x, y));
    out.depth->z(x, y) = hit.depth;
    out.depth->valid(x, y) = 1;
    (*out.no_source)(x, y) = inside ? 0 : 1;
  }
}

}  // namespace detail

struct GsFrame {
  Image image;
  double scanline_time = 0.0;
  DepthMap depth;
  double pose_weight = 0.0;
  Mask out_of_texture;  // pixels whose texture lookup fell outside the texture raster
};

struct RsFrame {
  Image image;
  int frame_index = 1;
  Mask occlusion_mask;  // true where no texture sample backs the pixel
  DepthMap depth;
};

/// Global-shutter view of `frame` at the pose of scanline s.
inline GsFrame render_gs(const Scene& scene, int frame, double s) {
  const CameraModel& cam = scene.camera;
  GsFrame g;
  g.scanline_time = s;
  g.pose_weight = pose_weight(scene, frame, s);
  g.image = Image(cam.width, cam.height, scene.texture.image.channels());
  g.depth = DepthMap(cam.width, cam.height);
  g.out_of_texture = Mask(cam.width, cam.height, 0);
  const CameraPose pose = CameraPose::at(scene.motion.velocity, g.pose_weight);
  for (int y = 0; y < cam.height; ++y) {
    detail::render_row(scene, pose, y, {&g.image, &g.depth, &g.out_of_texture});
  }
  return g;
}

/// Rolling-shutter frame: row s is row s of the global-shutter view at scanline s.
inline RsFrame compose_rs(const Scene& scene, int frame) {
  const CameraModel& cam = scene.camera;
  RsFrame r;
  r.frame_index = frame;
  r.image = Image(cam.width, cam.height, scene.texture.image.channels());
  r.depth = DepthMap(cam.width, cam.height);
  r.occlusion_mask = Mask(cam.width, cam.height, 0);
  for (int y = 0; y < cam.height; ++y) {
    const CameraPose pose = CameraPose::at(scene.motion.velocity, pose_weight(scene, frame, y));
    detail::render_row(scene, pose, y, {&r.image, &r.depth, &r.occlusion_mask});
  }
  return r;
}

struct BidirectionalFlow {
  FlowField forward;   // RS frame 1 -> RS frame 2
  FlowField backward;  // RS frame 2 -> RS frame 1
};

/// Closed-form optical flow of every RS pixel from the known velocity and the
/// RS depth maps (constant-velocity relation; the acceleration factor is not
/// part of it).
inline BidirectionalFlow gt_optical_flow(const Scene& scene, const RsFrame& rs1, const RsFrame& rs2) {
  const CameraModel& cam = scene.camera;
  BidirectionalFlow out{FlowField(cam.width, cam.height, std::nullopt, Direction::Forward),
                        FlowField(cam.width, cam.height, std::nullopt, Direction::Backward)};
  auto fill = [&](FlowField& flow, const DepthMap& depth) {
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        if (!depth.usable(x, y)) {
          flow.valid(x, y) = 0;
          continue;
        }
        try {
          flow.data(x, y) =
              rs_flow_closed_form(cam, scene.motion.velocity, scene.timing, {x, y}, depth.z(x, y), flow.direction);
        } catch (const Error&) {
          flow.valid(x, y) = 0;
        }
      }
    }
  };
  fill(out.forward, rs1.depth);
  fill(out.backward, rs2.depth);
  return out;
}

inline BidirectionalFlow gt_optical_flow(const Scene& scene) {
  return gt_optical_flow(scene, compose_rs(scene, 1), compose_rs(scene, 2));
}

/// Exact (projective) displacement of every RS pixel of `frame` onto the
/// global-shutter view at scanline s. Independent of the differential model.
inline FlowField gt_undistortion_flow(const Scene& scene, int frame, double s) {
  const CameraModel& cam = scene.camera;
  FlowField out(cam.width, cam.height, s, frame == 1 ? Direction::Forward : Direction::Backward);
  const CameraPose target = CameraPose::at(scene.motion.velocity, pose_weight(scene, frame, s));
  for (int y = 0; y < cam.height; ++y) {
    const CameraPose source = CameraPose::at(scene.motion.velocity, pose_weight(scene, frame, y));
    for (int x = 0; x < cam.width; ++x) {
      const detail::RayHit hit = detail::cast_ray(scene, source, x, y);
      const Eigen::Vector3d pc = target.to_camera(hit.point);
      if (!hit.ok || !(pc.z() > 0.0)) {
        out.valid(x, y) = 0;
        continue;
      }
      const Eigen::Vector2d q(cam.focal_length * pc.x() / pc.z() + cam.principal_point.x(),
                              cam.focal_length * pc.y() / pc.z() + cam.principal_point.y());
      out.data(x, y) = q - Eigen::Vector2d(x, y);
    }
  }
  return out;
}

/// Pixels of the global-shutter view at scanline s that no RS pixel of `frame`
/// lands on (bilinear footprint of the exact forward mapping).
inline Mask gt_occlusion(const Scene& scene, int frame, double s) {
  const CameraModel& cam = scene.camera;
  const FlowField u = gt_undistortion_flow(scene, frame, s);
  Mask covered(cam.width, cam.height, 0);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      if (!u.valid(x, y)) continue;
      const double qx = x + u.data(x, y).x();
      const double qy = y + u.data(x, y).y();
      const int x0 = static_cast<int>(std::floor(qx));
      const int y0 = static_cast<int>(std::floor(qy));
      const double ax = qx - x0;
      const double ay = qy - y0;
      const std::array<std::pair<int, int>, 4> cells{{{x0, y0}, {x0 + 1, y0}, {x0, y0 + 1}, {x0 + 1, y0 + 1}}};
      const std::array<double, 4> w{(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
      for (int i = 0; i < 4; ++i) {
        const auto [cx, cy] = cells[i];
        if (w[i] > 0.0 && covered.contains(cx, cy)) covered(cx, cy) = 1;
      }
    }
  }
  return mask_not(covered);
}

}  // namespace rsgeom
