#pragma once

// Randomised invariant suite behind `rsgeom selfcheck`.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rsgeom/geometry.hpp"
#include "rsgeom/io.hpp"
#include "rsgeom/scene.hpp"

namespace rsgeom {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::size_t samples = 0;
  double worst = 0.0;  // largest observed error (or violation count)
  double tolerance = 0.0;
  double seconds = 0.0;
  std::string detail;
};

struct SelfcheckOptions {
  std::uint64_t seed = 20240601;
  int bounds_motions = 1000;
  int reduction_samples = 100000;
  int fixed_point_samples = 100000;
};

namespace check {

inline double rel_err(double a, double b) {
  const double scale = std::max(std::abs(b), 1e-300);
  return a == b ? 0.0 : std::abs(a - b) / scale;
}

inline Eigen::Vector3d random_in_ball(std::mt19937_64& rng, double radius) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::Vector3d d(n(rng), n(rng), n(rng));
  if (d.norm() == 0.0) return Eigen::Vector3d::Zero();
  return d.normalized() * radius * std::cbrt(u(rng));
}

/// Random camera with h in {64, 480}, width 4h/3 and f in [100, 1000].
inline CameraModel random_camera(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> f(100.0, 1000.0);
  const int h = std::bernoulli_distribution(0.5)(rng) ? 64 : 480;
  return CameraModel::centered(4 * h / 3, h, f(rng));
}

/// Sweep: middle-scanline maps of random bounded motions over random
/// per-pixel depth in [1, 100] must satisfy the interval structure exactly.
/// Motions violating |gamma pi_v| < h are scaled down to 0.95 h first.
inline CheckResult correlation_bounds(std::uint64_t seed, int motions) {
  CheckResult r{"correlation bounds (middle scanline)", true, 0, 0.0, 0.0, 0.0, ""};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gamma_dist(0.0, 1.0);
  std::uniform_real_distribution<double> depth_dist(1.0, 100.0);
  std::size_t violations = 0;
  for (int i = 0; i < motions; ++i) {
    const CameraModel cam = random_camera(rng);
    RsTiming timing{gamma_dist(rng)};
    if (timing.gamma == 0.0) timing.gamma = 1.0;
    CameraVelocity vel{random_in_ball(rng, 1.0), random_in_ball(rng, 0.1)};
    DepthMap depth(cam.width, cam.height);
    for (auto& z : depth.z.data()) z = depth_dist(rng);
    double worst = 0.0;
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x)
        worst = std::max(worst, std::abs(timing.gamma * motion_field(cam, vel, {x, y}, depth.z(x, y)).y()));
    if (worst >= 0.95 * cam.h()) vel = vel.scaled(0.95 * cam.h() / worst * (1.0 - 1e-9));
    for (Direction d : {Direction::Forward, Direction::Backward}) {
      const auto map = correlation_map_from_geometry(cam, vel, timing, depth, cam.middle_scanline(), d);
      violations += validate_correlation_bounds(map).violations;
      r.samples += map.values.size();
    }
  }
  r.worst = static_cast<double>(violations);
  r.passed = violations == 0;
  r.detail = std::to_string(motions) + " motions x 2 directions, " + std::to_string(violations) + " violations";
  return r;
}

/// Acceleration forms evaluated at k = 0 / phi = 0 against the velocity forms.
inline CheckResult reductions(std::uint64_t seed, int samples) {
  CheckResult r{"k = 0 reductions", true, 0, 0.0, 0.0, 0.0, ""};
  r.tolerance = 1e-12;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < samples; ++i) {
    const double h = std::bernoulli_distribution(0.5)(rng) ? 64.0 : 480.0;
    const double gamma = 1.0 - unit(rng);  // (0, 1]
    const double g = std::bernoulli_distribution(0.5)(rng) ? gamma : -gamma;
    const double s1 = unit(rng) * (h - 1.0);
    double s2 = unit(rng) * (h - 1.0);
    const double eta = std::floor(unit(rng) * h);
    const double t = std::bernoulli_distribution(0.5)(rng) ? gamma * s1 / h : 1.0 + gamma * s2 / h;

    double e = rel_err(closed_form::time_weight_acceleration(t, 0.0), closed_form::time_weight_velocity(t));
    e = std::max(e, rel_err(closed_form::undistortion_factor_acceleration(s1, eta, g, h, 0.0),
                            closed_form::undistortion_factor_velocity(s1, eta, g, h)));
    if (std::abs(s1 - eta) > kRowPoleTol) {
      e = std::max(e, rel_err(closed_form::acceleration_propagation_ratio(s1, s2, eta, 0.0, h),
                              closed_form::velocity_propagation_ratio(s1, s2, eta)));
    }
    r.worst = std::max(r.worst, e);
    ++r.samples;
  }
  r.passed = r.worst <= r.tolerance;
  std::ostringstream os;
  os << "max relative error " << r.worst;
  r.detail = os.str();
  return r;
}

/// The closed-form flow reproduces itself through f = alpha(f_v) * pi.
inline CheckResult fixed_point(std::uint64_t seed, int samples) {
  CheckResult r{"flow fixed point", true, 0, 0.0, 0.0, 0.0, ""};
  r.tolerance = 1e-9;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (r.samples < static_cast<std::size_t>(samples)) {
    const CameraModel cam = random_camera(rng);
    const RsTiming timing{1.0 - unit(rng)};
    const CameraVelocity vel{random_in_ball(rng, 1.0), random_in_ball(rng, 0.1)};
    const Eigen::Vector2d px(unit(rng) * (cam.width - 1), unit(rng) * (cam.height - 1));
    const double z = 1.0 + 99.0 * unit(rng);
    const Direction d = std::bernoulli_distribution(0.5)(rng) ? Direction::Forward : Direction::Backward;
    const Eigen::Vector2d pi = motion_field(cam, vel.for_direction(d), px, z);
    // stay well clear of the singular configuration
    if (std::abs(cam.h() - timing.signed_gamma(d) * pi.y()) < 0.05 * cam.h()) continue;
    const Eigen::Vector2d f = rs_flow_closed_form(cam, vel, timing, px, z, d);
    const Eigen::Vector2d back = interpolation_factor(f.y(), timing, cam, d) * pi;
    const double scale = std::max(f.norm(), 1e-12);
    r.worst = std::max(r.worst, (f - back).norm() / scale);
    ++r.samples;
  }
  r.passed = r.worst <= r.tolerance;
  std::ostringstream os;
  os << "max relative error " << r.worst;
  r.detail = os.str();
  return r;
}

/// Flow times correlation map against the direct undistortion flow, on
/// simulator scenes, both directions, several target scanlines.
inline CheckResult two_path(std::uint64_t seed) {
  CheckResult r{"flow x correlation == direct undistortion", true, 0, 0.0, 0.0, 0.0, ""};
  r.tolerance = 1e-6;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 4; ++trial) {
    Scene scene;
    scene.camera = CameraModel::centered(96, 64, 120.0);
    scene.texture = procedural_texture(96, 64, 48, static_cast<std::uint32_t>(seed + trial));
    scene.plane = {8.0 + 2.0 * unit(rng), 0.05 * unit(rng), 0.05 * unit(rng)};
    scene.timing = {0.5 + 0.5 * std::abs(unit(rng))};
    scene.motion.velocity = {Eigen::Vector3d(0.3 * unit(rng), 0.2 * unit(rng), 0.1 * unit(rng)),
                             Eigen::Vector3d(0.01 * unit(rng), 0.01 * unit(rng), 0.01 * unit(rng))};
    scene.validate();
    const RsFrame rs1 = compose_rs(scene, 1);
    const RsFrame rs2 = compose_rs(scene, 2);
    const BidirectionalFlow flows = gt_optical_flow(scene, rs1, rs2);
    const double h = scene.camera.h();
    for (double s : {0.0, 0.5 * h, h - 1.0, 17.25}) {
      for (Direction d : {Direction::Forward, Direction::Backward}) {
        const FlowField& flow = d == Direction::Forward ? flows.forward : flows.backward;
        const DepthMap& depth = d == Direction::Forward ? rs1.depth : rs2.depth;
        const auto map = correlation_map_from_geometry(scene.camera, scene.motion.velocity, scene.timing, depth, s, d);
        const FlowField a = undistortion_from_flow(flow, map);
        const FlowField b = undistortion_flow_from_geometry(scene.camera, scene.motion, scene.timing, depth, s, d);
        for (int y = 0; y < a.height(); ++y)
          for (int x = 0; x < a.width(); ++x) {
            if (!a.valid(x, y) || !b.valid(x, y)) continue;
            r.worst = std::max(r.worst, (a.data(x, y) - b.data(x, y)).norm());
            ++r.samples;
          }
      }
    }
  }
  r.passed = r.samples > 0 && r.worst <= r.tolerance;
  std::ostringstream os;
  os << "max difference " << r.worst << " px";
  r.detail = os.str();
  return r;
}

/// In-memory encode / decode of random flows and depth maps, compared bit-wise.
inline CheckResult file_round_trip(std::uint64_t seed) {
  CheckResult r{"flo / pfm round trip", true, 0, 0.0, 0.0, 0.0, ""};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> val(-50.0f, 50.0f);
  std::uniform_int_distribution<int> dim(1, 40);
  std::bernoulli_distribution hole(0.1);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int w = dim(rng);
    const int h = dim(rng);
    FlowField flow(w, h, std::nullopt, Direction::Forward);
    DepthMap depth(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        flow.data(x, y) = Eigen::Vector2d(val(rng), val(rng));
        flow.valid(x, y) = hole(rng) ? 0 : 1;
        if (!flow.valid(x, y)) flow.data(x, y).setZero();
        depth.z(x, y) = std::abs(val(rng)) + 0.5f;
        depth.valid(x, y) = hole(rng) ? 0 : 1;
      }
    const auto flo_bytes = io::encode_flo(flow);
    const FlowField f2 = io::decode_flo(flo_bytes);
    if (io::encode_flo(f2) != flo_bytes || !(f2.valid == flow.valid) || !(f2.data == flow.data)) ++mismatches;
    const auto pfm_bytes = io::encode_pfm(depth);
    const DepthMap d2 = io::decode_pfm(pfm_bytes);
    if (io::encode_pfm(d2) != pfm_bytes || !(d2.valid == depth.valid)) ++mismatches;
    r.samples += 2;
  }
  r.worst = static_cast<double>(mismatches);
  r.passed = mismatches == 0;
  r.detail = std::to_string(mismatches) + " mismatching files";
  return r;
}

inline CheckResult timed(const std::function<CheckResult()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r = fn();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace check

inline std::vector<CheckResult> run_selfcheck(const SelfcheckOptions& opt = {}) {
  std::vector<CheckResult> out;
  out.push_back(check::timed([&] { return check::correlation_bounds(opt.seed, opt.bounds_motions); }));
  out.push_back(check::timed([&] { return check::reductions(opt.seed + 1, opt.reduction_samples); }));
  out.push_back(check::timed([&] { return check::fixed_point(opt.seed + 2, opt.fixed_point_samples); }));
  out.push_back(check::timed([&] { return check::two_path(opt.seed + 3); }));
  out.push_back(check::timed([&] { return check::file_round_trip(opt.seed + 4); }));
  return out;
}

}  // namespace rsgeom
