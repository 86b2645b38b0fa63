#pragma once

// Analytic estimators: camera velocity from flow + depth (linear least squares
// and a consensus wrapper) and the acceleration propagation parameter by a
// one-dimensional photometric fit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "rsgeom/geometry.hpp"
#include "rsgeom/metrics.hpp"
#include "rsgeom/warping.hpp"

namespace rsgeom {

struct MotionEstimate {
  CameraVelocity velocity;  // forward convention (frame 1 -> frame 2)
  double residual_rms = 0.0;  // px, of f - alpha * pi(model)
  std::size_t pixels = 0;
};

namespace detail {

struct FlowSample {
  int x = 0;
  int y = 0;
  Eigen::Vector2d target;  // f / alpha
  double alpha = 1.0;
  double depth = 1.0;
};

/// Rows of the linear system pi = [A/Z | B] [v; omega] for one pixel.
inline Eigen::Matrix<double, 2, 6> motion_jacobian(const CameraModel& cam, int px, int py, double depth) {
  const double f = cam.focal_length;
  const double x = px - cam.principal_point.x();
  const double y = py - cam.principal_point.y();
  Eigen::Matrix<double, 2, 6> j;
  j << -f / depth, 0.0, x / depth, x * y / f, -(f + x * x / f), y,
       0.0, -f / depth, y / depth, f + y * y / f, -x * y / f, -x;
  return j;
}

inline std::vector<FlowSample> collect_samples(const FlowField& flow, const DepthMap& depth, const CameraModel& cam,
                                               const RsTiming& timing, bool rs_aware) {
  if (!flow.is_optical_flow()) fail(ErrorCode::InvalidArgument, "motion estimation needs an optical flow");
  if (flow.width() != cam.width || flow.height() != cam.height || depth.width() != cam.width ||
      depth.height() != cam.height) {
    fail(ErrorCode::DimensionMismatch, "flow / depth / camera sizes differ");
  }
  std::vector<FlowSample> out;
  out.reserve(flow.data.size());
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      if (!flow.valid(x, y) || !depth.usable(x, y)) continue;
      const Eigen::Vector2d& f = flow.data(x, y);
      const double alpha = rs_aware ? interpolation_factor(f.y(), timing, cam, flow.direction) : 1.0;
      if (std::abs(alpha) < 1e-9) continue;
      out.push_back({x, y, f / alpha, alpha, depth.z(x, y)});
    }
  }
  return out;
}

/// Least squares over the given samples; returns nullopt when the system is
/// rank deficient. The solution is in the flow's own direction convention.
inline std::optional<Eigen::Matrix<double, 6, 1>> solve_samples(const CameraModel& cam,
                                                                const std::vector<FlowSample>& samples,
                                                                const std::vector<std::size_t>* subset) {
  const std::size_t n = subset != nullptr ? subset->size() : samples.size();
  Eigen::MatrixXd jac(2 * n, 6);
  Eigen::VectorXd rhs(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const FlowSample& s = samples[subset != nullptr ? (*subset)[i] : i];
    jac.block<2, 6>(2 * i, 0) = motion_jacobian(cam, s.x, s.y, s.depth);
    rhs.segment<2>(2 * i) = s.target;
  }
  // equilibrate columns so translation and rotation unknowns are comparable
  Eigen::Matrix<double, 6, 1> scale;
  for (int c = 0; c < 6; ++c) {
    const double norm = jac.col(c).norm();
    scale(c) = norm > 0.0 ? 1.0 / norm : 1.0;
    jac.col(c) *= scale(c);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jac);
  qr.setThreshold(1e-10);
  if (qr.rank() < 6) return std::nullopt;
  Eigen::Matrix<double, 6, 1> sol = qr.solve(rhs);
  return sol.cwiseProduct(scale);
}

inline double flow_residual(const CameraModel& cam, const FlowSample& s, const Eigen::Matrix<double, 6, 1>& theta) {
  const Eigen::Vector2d pi = motion_jacobian(cam, s.x, s.y, s.depth) * theta;
  return (s.alpha * (s.target - pi)).norm();
}

inline CameraVelocity to_velocity(const Eigen::Matrix<double, 6, 1>& theta, Direction direction) {
  CameraVelocity v{theta.head<3>(), theta.tail<3>()};
  return v.for_direction(direction);
}

}  // namespace detail

/// Linear least-squares camera velocity from optical flow and known depth.
/// Each pixel contributes f / alpha(f_v) = A v / Z + B omega; with
/// `rs_aware` false alpha is forced to 1 (plain global-shutter model).
inline MotionEstimate estimate_motion_ls(const FlowField& flow, const DepthMap& depth, const CameraModel& camera,
                                         const RsTiming& timing, bool rs_aware = true) {
  const auto samples = detail::collect_samples(flow, depth, camera, timing, rs_aware);
  if (samples.size() < 3) fail(ErrorCode::InsufficientData, "need at least 3 valid pixels");
  const auto theta = detail::solve_samples(camera, samples, nullptr);
  if (!theta) fail(ErrorCode::RankDeficient, "motion system is singular");
  double sq = 0.0;
  for (const auto& s : samples) {
    const double r = detail::flow_residual(camera, s, *theta);
    sq += r * r;
  }
  return {detail::to_velocity(*theta, flow.direction), std::sqrt(sq / samples.size()), samples.size()};
}

struct RobustParams {
  int iterations = 300;
  double inlier_threshold_px = 0.5;
  std::uint64_t seed = 0;
  double min_inlier_ratio = 0.1;
};

struct RobustMotionEstimate {
  MotionEstimate estimate;
  Mask inliers;
  double inlier_ratio = 0.0;
};

/// Consensus wrapper: minimal 3-pixel fits, the largest inlier set wins and is
/// refit by least squares. Deterministic for a given seed.
inline RobustMotionEstimate estimate_motion_robust(const FlowField& flow, const DepthMap& depth,
                                                   const CameraModel& camera, const RsTiming& timing,
                                                   const RobustParams& params = {}) {
  const auto samples = detail::collect_samples(flow, depth, camera, timing, true);
  if (samples.size() < 3) fail(ErrorCode::InsufficientData, "need at least 3 valid pixels");
  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);

  auto inliers_of = [&](const Eigen::Matrix<double, 6, 1>& theta, std::vector<std::size_t>& out) {
    out.clear();
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (detail::flow_residual(camera, samples[i], theta) < params.inlier_threshold_px) out.push_back(i);
  };

  std::vector<std::size_t> best;
  std::vector<std::size_t> current;
  std::vector<std::size_t> minimal(3);
  for (int it = 0; it < params.iterations; ++it) {
    minimal[0] = pick(rng);
    do minimal[1] = pick(rng); while (minimal[1] == minimal[0]);
    do minimal[2] = pick(rng); while (minimal[2] == minimal[0] || minimal[2] == minimal[1]);
    const auto theta = detail::solve_samples(camera, samples, &minimal);
    if (!theta) continue;
    inliers_of(*theta, current);
    if (current.size() > best.size()) best.swap(current);
  }
  const double ratio = static_cast<double>(best.size()) / samples.size();
  if (best.size() < 3 || ratio < params.min_inlier_ratio) fail(ErrorCode::NoConsensus, "inlier ratio below threshold");

  auto theta = detail::solve_samples(camera, samples, &best);
  if (!theta) fail(ErrorCode::RankDeficient, "inlier set is degenerate");
  // one re-selection with the refit model, then the final fit
  inliers_of(*theta, current);
  if (current.size() >= 3) {
    if (auto refit = detail::solve_samples(camera, samples, &current)) {
      theta = refit;
      best.swap(current);
    }
  }

  RobustMotionEstimate out;
  out.inliers = Mask(camera.width, camera.height, 0);
  double sq = 0.0;
  for (std::size_t i : best) {
    out.inliers(samples[i].x, samples[i].y) = 1;
    const double r = detail::flow_residual(camera, samples[i], *theta);
    sq += r * r;
  }
  out.estimate = {detail::to_velocity(*theta, flow.direction), std::sqrt(sq / best.size()), best.size()};
  out.inlier_ratio = static_cast<double>(best.size()) / samples.size();
  return out;
}

// ---------------------------------------------------------------------------
// Acceleration parameter fitting

struct PhiSearch {
  double lo = -1.9;
  double hi = 4.0;
  int grid = 60;
  double tolerance = 1e-4;
  double improvement_margin = 0.0;  // required objective gain over phi = 0
};

/// Mean squared photometric error between the RS frame splatted to
/// `reference_s` (undistortion flow propagated with phi) and the reference.
inline double phi_objective(const Image& rs, const FlowField& u_mid, double reference_s, const Image& reference,
                            const CameraModel& camera, double phi, const SplatConfig& splat = {WeightMode::Uniform},
                            const Mask* reference_valid = nullptr) {
  const FlowField u = propagate(u_mid, reference_s, phi, camera);
  const SplatResult out = splat_forward(rs, u, nullptr, splat);
  Mask sel = reference_valid != nullptr ? mask_and(out.valid, *reference_valid) : out.valid;
  return mean_squared_error(out.image, reference, &sel);
}

struct PhiFit {
  double phi = 0.0;
  double objective = 0.0;
  double objective_at_zero = std::numeric_limits<double>::quiet_NaN();
  bool non_improving = false;  // best phi no better than phi = 0 by the margin
  std::vector<std::pair<double, double>> grid;  // (phi, objective) samples
};

/// Coarse grid then golden-section refinement of a scalar objective.
template <typename Objective>
PhiFit fit_scalar(Objective&& objective, const PhiSearch& search) {
  if (!(search.lo < search.hi) || !std::isfinite(search.lo) || !std::isfinite(search.hi) || search.grid < 3) {
    fail(ErrorCode::EmptySearchRange, "phi search range is empty");
  }
  PhiFit fit;
  const double step = (search.hi - search.lo) / (search.grid - 1);
  std::size_t best = 0;
  for (int i = 0; i < search.grid; ++i) {
    const double phi = search.lo + i * step;
    fit.grid.emplace_back(phi, objective(phi));
    if (fit.grid.back().second < fit.grid[best].second) best = fit.grid.size() - 1;
  }
  double a = fit.grid[best > 0 ? best - 1 : 0].first;
  double b = fit.grid[std::min<std::size_t>(best + 1, fit.grid.size() - 1)].first;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  while (b - a > search.tolerance) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  fit.phi = 0.5 * (a + b);
  fit.objective = objective(fit.phi);
  if (fit.grid[best].second < fit.objective) {
    fit.phi = fit.grid[best].first;
    fit.objective = fit.grid[best].second;
  }
  if (search.lo <= 0.0 && 0.0 <= search.hi) {
    fit.objective_at_zero = objective(0.0);
    fit.non_improving = !(fit.objective < fit.objective_at_zero - search.improvement_margin);
  }
  return fit;
}

struct PhiEstimate {
  PhiFit forward;   // phi_1, frame 1
  PhiFit backward;  // phi_2, frame 2 (negated-gamma convention)
};

/// Fits phi_1 and phi_2 independently so that each RS frame, splatted with
/// its middle-scanline undistortion flow propagated to `reference_s`, matches
/// the global-shutter reference image at that scanline.
inline PhiEstimate estimate_phi(const Image& rs1, const Image& rs2, const FlowField& u1m, const FlowField& u2m,
                                double reference_s, const Image& reference1, const Image& reference2,
                                const CameraModel& camera, const PhiSearch& search = {},
                                const SplatConfig& splat = {WeightMode::Uniform}) {
  PhiEstimate est;
  est.forward = fit_scalar(
      [&](double phi) { return phi_objective(rs1, u1m, reference_s, reference1, camera, phi, splat); }, search);
  est.backward = fit_scalar(
      [&](double phi) { return phi_objective(rs2, u2m, reference_s, reference2, camera, phi, splat); }, search);
  return est;
}

}  // namespace rsgeom
