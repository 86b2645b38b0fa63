// Acceptance suite: one PASS / FAIL line per criterion, exit status 1 if any
// criterion fails. Thresholds are fixed here and never adapted to results.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "../test_support.hpp"

using namespace rsgeom;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* title;
  double time_limit;  // seconds; <= 0 means no runtime bound
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

constexpr std::uint64_t kSeed = 20240601;

/// 320x256, gamma 1, constant velocity, slanted textured plane.
Scene round_trip_scene() {
  Scene sc;
  sc.camera = CameraModel::centered(320, 256, 300.0);
  sc.texture = procedural_texture(320, 256, 320, 7);
  sc.plane = {10.0, 0.02, 0.03};
  sc.timing = {1.0};
  sc.motion.velocity = {{-0.8, 0.15, 0.05}, {0.002, -0.003, 0.004}};
  sc.validate();
  return sc;
}

double max_flow(const FlowField& f) {
  double m = 0.0;
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x)
      if (f.valid(x, y)) m = std::max(m, f.data(x, y).norm());
  return m;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- 1 -----------------------------------------------------------------------
Outcome round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  const Scene sc = round_trip_scene();
  const RsFrame rs1 = compose_rs(sc, 1);
  const RsFrame rs2 = compose_rs(sc, 2);
  const InversionInput in = testing::gt_inversion_input(sc, rs1, rs2, true);
  const double m = sc.camera.middle_scanline();
  const auto out = invert(in, {m}, {}, 1);
  const double runtime = seconds_since(t0);

  const double flow_px = std::max(max_flow(in.forward), max_flow(in.backward));
  double worst_psnr = 1e9, worst_ssim = 1e9;
  for (int frame : {1, 2}) {
    const SplatResult& r = frame == 1 ? out[0].forward : out[0].backward;
    const Image gs = render_gs(sc, frame, m).image;
    const Mask mask = testing::evaluation_mask(sc, r, frame, m);
    worst_psnr = std::min(worst_psnr, psnr(r.image, gs, &mask));
    worst_ssim = std::min(worst_ssim, ssim(r.image, gs, &mask));
  }
  return {flow_px >= 20.0 && worst_psnr >= 35.0 && worst_ssim >= 0.97 && runtime <= 5.0,
          fmt("max flow %.1f px (>= 20), min PSNR %.2f dB (>= 35), min SSIM %.4f (>= 0.97), inversion %.2f s (<= 5)",
              flow_px, worst_psnr, worst_ssim, runtime)};
}

// --- 2 -----------------------------------------------------------------------
Outcome scanline_video() {
  const Scene sc = round_trip_scene();
  const RsFrame rs1 = compose_rs(sc, 1);
  const RsFrame rs2 = compose_rs(sc, 2);
  const InversionInput in = testing::gt_inversion_input(sc, rs1, rs2, true);
  const auto grid = scanline_grid(33, sc.camera);
  const auto t0 = std::chrono::steady_clock::now();
  const auto out = invert(in, grid, {}, 1);
  const double runtime = seconds_since(t0);

  double worst = 1e9, worst_jump = 0.0;
  for (int frame : {1, 2}) {
    double prev = std::nan("");
    for (const GsEstimate& e : out) {
      const SplatResult& r = frame == 1 ? e.forward : e.backward;
      const Mask mask = testing::evaluation_mask(sc, r, frame, e.scanline);
      const double p = psnr(r.image, render_gs(sc, frame, e.scanline).image, &mask);
      worst = std::min(worst, p);
      if (!std::isnan(prev)) worst_jump = std::max(worst_jump, prev - p);
      prev = p;
    }
  }
  return {worst >= 33.0 && worst_jump <= 3.0 && runtime <= 30.0,
          fmt("33 scanlines x 2 frames: min PSNR %.2f dB (>= 33), largest drop %.2f dB (<= 3), inversion %.2f s (<= 30)",
              worst, worst_jump, runtime)};
}

// --- 3-6 ---------------------------------------------------------------------
Outcome from_check(const CheckResult& r) { return {r.passed, r.detail}; }

// --- 7 -----------------------------------------------------------------------
double relative_velocity_error(const CameraVelocity& est, const CameraVelocity& truth) {
  return std::max((est.v - truth.v).norm() / truth.v.norm(), (est.omega - truth.omega).norm() / truth.omega.norm());
}

Outcome motion_recovery() {
  const Scene sc = round_trip_scene();
  const RsFrame rs1 = compose_rs(sc, 1);
  const RsFrame rs2 = compose_rs(sc, 2);
  const BidirectionalFlow flow = gt_optical_flow(sc, rs1, rs2);
  const MotionEstimate ls = estimate_motion_ls(flow.forward, rs1.depth, sc.camera, sc.timing);
  const double e_ls = relative_velocity_error(ls.velocity, sc.motion.velocity);

  FlowField corrupted = flow.forward;
  testing::Gen g(kSeed);
  for (int y = 0; y < corrupted.height(); ++y)
    for (int x = 0; x < corrupted.width(); ++x)
      if (g.uniform(0.0, 1.0) < 0.3) {
        const double mag = g.uniform(3.0, 30.0), ang = g.uniform(0.0, 2.0 * M_PI);
        corrupted.data(x, y) += mag * Eigen::Vector2d(std::cos(ang), std::sin(ang));
      }
  const RobustMotionEstimate rb =
      estimate_motion_robust(corrupted, rs1.depth, sc.camera, sc.timing, {300, 0.5, kSeed, 0.1});
  const double e_rb = relative_velocity_error(rb.estimate.velocity, sc.motion.velocity);
  return {e_ls <= 1e-6 && e_rb <= 1e-3,
          fmt("least squares rel. error %.2e (<= 1e-6), consensus with 30%% outliers %.2e (<= 1e-3)", e_ls, e_rb)};
}

// --- 8 -----------------------------------------------------------------------
Outcome acceleration_fit() {
  Scene sc;
  sc.camera = CameraModel::centered(160, 128, 150.0);
  sc.texture = procedural_texture(160, 128, 160, 5);
  sc.plane = {10.0, 0.0, 0.0};
  sc.timing = {1.0};
  sc.motion.velocity = {{-0.8, 0.3, 0.0}, {0.0, 0.0, 0.0}};
  sc.motion.k = 0.5;
  sc.validate();
  const RsFrame rs1 = compose_rs(sc, 1);
  const RsFrame rs2 = compose_rs(sc, 2);
  const double m = sc.camera.middle_scanline();
  const FlowField u1m = gt_undistortion_flow(sc, 1, m);
  const FlowField u2m = gt_undistortion_flow(sc, 2, m);
  const GsFrame ref1 = render_gs(sc, 1, 0.0);
  const GsFrame ref2 = render_gs(sc, 2, 0.0);
  const PhiEstimate fit = estimate_phi(rs1.image, rs2.image, u1m, u2m, 0.0, ref1.image, ref2.image, sc.camera);
  const double expected = sc.motion.k * sc.timing.gamma;

  // first-scanline frame of RS1 propagated with the fitted phi vs the velocity model
  const SplatResult acc = splat_forward(rs1.image, propagate(u1m, 0.0, fit.forward.phi, sc.camera), nullptr,
                                        {WeightMode::Uniform});
  const SplatResult vel = splat_forward(rs1.image, propagate(u1m, 0.0, std::nullopt, sc.camera), nullptr,
                                        {WeightMode::Uniform});
  const Mask occ = mask_not(gt_occlusion(sc, 1, 0.0));
  const Mask mask = mask_and(mask_and(acc.valid, vel.valid), occ);
  const double p_acc = psnr(acc.image, ref1.image, &mask);
  const double p_vel = psnr(vel.image, ref1.image, &mask);
  const bool phi_ok = std::abs(fit.forward.phi - expected) <= 0.05;
  return {phi_ok && p_acc > p_vel,
          fmt("phi1 = %.3f (expected %.2f +- 0.05, %s), phi2 = %.3f; PSNR acceleration %.2f dB vs velocity %.2f dB (%s)",
              fit.forward.phi, expected, phi_ok ? "ok" : "MISSED", fit.backward.phi, p_acc, p_vel,
              p_acc > p_vel ? "ok" : "MISSED")};
}

// --- 9 -----------------------------------------------------------------------
Outcome gamma_sweep() {
  const Scene sc = round_trip_scene();
  const RsFrame rs1 = compose_rs(sc, 1);
  const RsFrame rs2 = compose_rs(sc, 2);
  InversionInput in = testing::gt_inversion_input(sc, rs1, rs2, true);
  const double m = sc.camera.middle_scanline();
  const Image gs = render_gs(sc, 1, m).image;
  const std::vector<double> gammas{1.0, 0.8, 0.6};  // increasing |gamma' - 1|
  std::vector<SplatResult> results;
  for (double gp : gammas) {
    in.timing = {gp};
    results.push_back(invert(in, {m}, {}, 1)[0].forward);
  }
  // common support so every gamma' is scored on the same pixels
  Mask mask = mask_not(gt_occlusion(sc, 1, m));
  for (const auto& r : results) mask = mask_and(mask, r.valid);
  std::vector<double> p;
  for (const auto& r : results) p.push_back(psnr(r.image, gs, &mask));
  const bool monotone = p[0] >= p[1] && p[1] >= p[2];
  return {monotone, fmt("PSNR at gamma' = 1.0 / 0.8 / 0.6: %.2f / %.2f / %.2f dB (nonincreasing)", p[0], p[1], p[2])};
}

// --- 10 ----------------------------------------------------------------------
Outcome file_io() {
  const CheckResult rt = check::file_round_trip(kSeed);
  const fs::path fx = RSGEOM_FIXTURE_DIR;
  struct Bad {
    const char* name;
    ErrorCode code;
  };
  const std::vector<Bad> bad{{"bad_magic.flo", ErrorCode::BadMagic},       {"truncated.flo", ErrorCode::TruncatedFile},
                             {"bad_dims.flo", ErrorCode::DecodeError},     {"bad_magic.pfm", ErrorCode::BadMagic},
                             {"bad_header.pfm", ErrorCode::DecodeError},   {"zero_scale.pfm", ErrorCode::DecodeError},
                             {"truncated.pfm", ErrorCode::TruncatedFile},  {"color.pfm", ErrorCode::UnsupportedVariant}};
  int rejected = 0;
  std::string missed;
  for (const Bad& b : bad) {
    const std::string n = b.name;
    const auto code = testing::thrown_code([&] {
      if (n.ends_with(".flo")) io::read_flo(fx / n);
      else io::read_pfm(fx / n);
    });
    if (code == b.code) ++rejected;
    else missed += " " + n;
  }
  // the well-formed fixtures decode
  bool good = true;
  try {
    io::read_flo(fx / "flow_2x2.flo");
    good = io::read_pfm(fx / "depth_be.pfm").z == io::read_pfm(fx / "depth_le.pfm").z;
  } catch (const Error&) {
    good = false;
  }
  const bool ok = rt.passed && rejected == static_cast<int>(bad.size()) && good;
  return {ok, fmt("%zu round trips, %s; %d/%zu corrupted fixtures rejected with the right code%s; valid fixtures %s",
                  rt.samples, rt.detail.c_str(), rejected, bad.size(), missed.c_str(), good ? "decode" : "FAIL")};
}

// --- 11 ----------------------------------------------------------------------
Outcome cli_selfcheck() {
  const std::string cmd = std::string(RSGEOM_CLI_PATH) + " selfcheck > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code == 0, fmt("rsgeom selfcheck exit status %d", code)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "round-trip inversion at the middle scanline", 0, round_trip},
      {2, "arbitrary-scanline video", 0, scanline_video},
      {3, "middle-scanline correlation bounds", 20.0,
       [] { return from_check(check::correlation_bounds(kSeed, 1000)); }},
      {4, "k = 0 / phi = 0 reductions", 0, [] { return from_check(check::reductions(kSeed, 100000)); }},
      {5, "closed-form flow fixed point", 0, [] { return from_check(check::fixed_point(kSeed, 100000)); }},
      {6, "two-path undistortion equivalence", 0, [] { return from_check(check::two_path(kSeed)); }},
      {7, "camera motion recovery", 0, motion_recovery},
      {8, "acceleration parameter fit", 0, acceleration_fit},
      {9, "readout-ratio robustness", 0, gamma_sweep},
      {10, "flo / PFM files", 0, file_io},
      {11, "CLI selfcheck", 60.0, cli_selfcheck},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double t = seconds_since(t0);
    bool pass = o.passed;
    if (c.time_limit > 0.0 && t > c.time_limit) {
      pass = false;
      o.detail += fmt("; runtime over the %.0f s limit", c.time_limit);
    }
    failed += pass ? 0 : 1;
    std::printf("[%s] %2d %-44s %7.2f s  %s\n", pass ? "PASS" : "FAIL", c.id, c.title, t, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
