#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

using namespace rsgeom;
using rsgeom::testing::Gen;
using rsgeom::testing::make_scene;

namespace {

bool rows_equal(const Image& a, int ya, const Image& b, int yb) {
  for (int x = 0; x < a.width(); ++x)
    for (int c = 0; c < a.channels(); ++c)
      if (a.at(x, ya, c) != b.at(x, yb, c)) return false;
  return true;
}

/// Sub-pixel global translation of `b` relative to `a` over an interior
/// window: integer SSD search followed by a parabola through the minimum.
Eigen::Vector2d measure_shift(const Image& a, const Image& b, int radius, int margin) {
  const Raster<float> ga = to_gray(a);
  const Raster<float> gb = to_gray(b);
  auto ssd = [&](int dx, int dy) {
    double s = 0.0;
    for (int y = margin; y < a.height() - margin; ++y)
      for (int x = margin; x < a.width() - margin; ++x) {
        const double d = gb(x + dx, y + dy) - ga(x, y);
        s += d * d;
      }
    return s;
  };
  int bx = 0, by = 0;
  double best = ssd(0, 0);
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      const double v = ssd(dx, dy);
      if (v < best) best = v, bx = dx, by = dy;
    }
  auto vertex = [](double m, double c, double p) { return 0.5 * (m - p) / (m - 2.0 * c + p); };
  return {bx + vertex(ssd(bx - 1, by), best, ssd(bx + 1, by)), by + vertex(ssd(bx, by - 1), best, ssd(bx, by + 1))};
}

}  // namespace

TEST(RenderGs, StaticCameraIsTimeInvariant) {
  const Scene sc = make_scene(64, 48, 80.0);
  const GsFrame ref = render_gs(sc, 1, 0.0);
  for (double s : {0.0, 10.5, 47.0})
    for (int f : {1, 2}) EXPECT_EQ(render_gs(sc, f, s).image, ref.image);
}

TEST(RenderGs, IdentityPoseIsTheReferenceView) {
  Scene sc = make_scene(64, 48, 80.0);
  sc.motion.velocity = {{0.5, 0.1, 0.2}, {0.01, 0.02, 0.03}};
  const GsFrame g = render_gs(sc, 1, 0.0);
  EXPECT_EQ(g.pose_weight, 0.0);
  float px[3];
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x) {
      sc.texture.sample(x, y, px);
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(g.image.at(x, y, c), px[c], 1e-6f);
      EXPECT_NEAR(g.depth.z(x, y), sc.plane.z0, 1e-9);
    }
}

TEST(RenderGs, RollKeepsThePrincipalPointFixed) {
  Scene sc = make_scene(65, 49, 80.0);  // odd size: principal point on a pixel centre
  sc.motion.velocity = {{0, 0, 0}, {0, 0, 0.05}};
  const int cx = 32, cy = 24;
  const GsFrame ref = render_gs(sc, 1, 0.0);
  for (double s : {5.0, 24.0, 48.0})
    for (int f : {1, 2}) {
      const GsFrame g = render_gs(sc, f, s);
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(g.image.at(cx, cy, c), ref.image.at(cx, cy, c), 1e-6f);
    }
}

TEST(RenderGs, DepthFollowsThePlane) {
  Scene sc = make_scene(64, 48, 80.0);
  sc.plane = {12.0, 0.05, -0.08};
  sc.validate();
  const GsFrame g = render_gs(sc, 1, 0.0);
  for (int y = 0; y < 48; y += 7)
    for (int x = 0; x < 64; x += 9) {
      const Eigen::Vector2d off = Eigen::Vector2d(x, y) - sc.camera.principal_point;
      EXPECT_NEAR(g.depth.z(x, y), sc.plane.reference_depth(off.x(), off.y(), 80.0), 1e-9);
      EXPECT_GT(g.depth.z(x, y), 0.0);
    }
}

TEST(RenderGs, PlaneBehindCamera) {
  Scene sc = make_scene(64, 48, 80.0);
  sc.plane = {1.0, 0.0, 0.0};
  sc.motion.velocity = {{0, 0, 3.0}, {0, 0, 0}};  // frame 2 passes through the plane
  try {
    render_gs(sc, 2, 40.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PlaneBehindCamera);
  }
}

TEST(ComposeRs, StaticCameraEqualsGs) {
  const Scene sc = make_scene(64, 48, 80.0);
  EXPECT_EQ(compose_rs(sc, 1).image, render_gs(sc, 1, 0.0).image);
  EXPECT_EQ(compose_rs(sc, 2).image, render_gs(sc, 1, 0.0).image);
  EXPECT_EQ(count_set(compose_rs(sc, 1).occlusion_mask), 0u);
}

TEST(ComposeRs, EveryRowMatchesItsGlobalShutterView) {
  Gen g(31);
  for (int trial = 0; trial < 3; ++trial) {
    Scene sc = make_scene(48, 32, 60.0, 5 + trial);
    sc.plane = {g.uniform(6, 14), g.uniform(-0.05, 0.05), g.uniform(-0.05, 0.05)};
    sc.timing = {g.uniform(0.2, 1.0)};
    sc.motion = {{g.vec3(0.3), g.vec3(0.02)}, trial == 2 ? 0.5 : 0.0};
    sc.validate();
    for (int f : {1, 2}) {
      const RsFrame rs = compose_rs(sc, f);
      EXPECT_EQ(rs.frame_index, f);
      for (int y = 0; y < 32; ++y) {
        const GsFrame gs = render_gs(sc, f, y);
        EXPECT_TRUE(rows_equal(rs.image, y, gs.image, y)) << "frame " << f << " row " << y;
        for (int x = 0; x < 48; ++x) EXPECT_EQ(rs.depth.z(x, y), gs.depth.z(x, y));
      }
    }
  }
}

TEST(ComposeRs, MiddleRowIsBitExact) {
  Scene sc = make_scene(64, 48, 80.0);
  sc.motion.velocity = {{0.4, -0.2, 0.1}, {0.01, 0.0, 0.02}};
  const RsFrame rs = compose_rs(sc, 1);
  EXPECT_TRUE(rows_equal(rs.image, 24, render_gs(sc, 1, 24.0).image, 24));
}

TEST(ComposeRs, VerticalLineBecomesSlanted) {
  // texture: dark vertical bar around column 40 of the reference view
  Scene sc = make_scene(96, 64, 100.0);
  const double bar = 40.0;
  for (int y = 0; y < sc.texture.image.height(); ++y)
    for (int x = 0; x < sc.texture.image.width(); ++x) {
      const double d = (x - sc.texture.origin.x()) - bar;
      const float v = static_cast<float>(1.0 - std::exp(-d * d / 8.0));
      for (int c = 0; c < 3; ++c) sc.texture.image.at(x, y, c) = v;
    }
  const double vx = 0.6;
  sc.timing = {0.8};
  sc.motion.velocity = {{vx, 0, 0}, {0, 0, 0}};
  const RsFrame rs = compose_rs(sc, 1);
  for (int y = 0; y < 64; y += 9) {
    double wsum = 0.0, xsum = 0.0;
    for (int x = 0; x < 96; ++x) {
      const double w = 1.0 - rs.image.at(x, y, 0);
      wsum += w;
      xsum += w * x;
    }
    // row y is seen at lambda = gamma y / h: image motion -f vx lambda / Z
    const double expected = bar - 100.0 * vx * (0.8 * y / 64.0) / sc.plane.z0;
    EXPECT_NEAR(xsum / wsum, expected, 0.05) << "row " << y;
  }
}

TEST(GtOpticalFlow, StaticCameraIsZero) {
  const Scene sc = make_scene(32, 24, 40.0);
  const BidirectionalFlow f = gt_optical_flow(sc);
  for (const auto& v : f.forward.data.data()) EXPECT_EQ(v, Eigen::Vector2d::Zero());
  for (const auto& v : f.backward.data.data()) EXPECT_EQ(v, Eigen::Vector2d::Zero());
  EXPECT_EQ(f.forward.direction, Direction::Forward);
  EXPECT_EQ(f.backward.direction, Direction::Backward);
  EXPECT_TRUE(f.forward.is_optical_flow());
}

TEST(GtOpticalFlow, ForwardThenBackwardReturnsHome) {
  // lateral translation over a fronto-parallel plane: pi is the same at every
  // pixel, so the round trip is exact up to rounding
  Scene sc = make_scene(120, 96, 120.0);
  sc.motion.velocity = {{0.7, -0.3, 0}, {0, 0, 0}};
  sc.validate();
  const BidirectionalFlow f = gt_optical_flow(sc);
  int checked = 0;
  for (int y = 0; y < 96; ++y)
    for (int x = 0; x < 120; ++x) {
      const Eigen::Vector2d q = Eigen::Vector2d(x, y) + f.forward.data(x, y);
      const int qx = static_cast<int>(std::lround(q.x()));
      const int qy = static_cast<int>(std::lround(q.y()));
      if (!f.backward.valid.contains(qx, qy)) continue;
      EXPECT_LE((f.forward.data(x, y) + f.backward.data(qx, qy)).norm(), 1e-3);
      ++checked;
    }
  EXPECT_GT(checked, 5000);
}

TEST(GtOpticalFlow, MatchesImageMeasuredShift) {
  Scene sc = make_scene(160, 128, 150.0);
  sc.timing = {0.9};
  sc.motion.velocity = {{-0.35, 0.4, 0}, {0, 0, 0}};
  sc.validate();
  const RsFrame rs1 = compose_rs(sc, 1);
  const RsFrame rs2 = compose_rs(sc, 2);
  const BidirectionalFlow f = gt_optical_flow(sc, rs1, rs2);
  const Eigen::Vector2d measured = measure_shift(rs1.image, rs2.image, 9, 12);
  EXPECT_NEAR(measured.x(), f.forward.data(80, 64).x(), 0.1);
  EXPECT_NEAR(measured.y(), f.forward.data(80, 64).y(), 0.1);
  const Eigen::Vector2d back = measure_shift(rs2.image, rs1.image, 9, 12);
  EXPECT_NEAR(back.y(), f.backward.data(80, 64).y(), 0.1);
}

TEST(GtOcclusion, StaticCameraIsEmpty) {
  const Scene sc = make_scene(32, 24, 40.0);
  for (double s : {0.0, 12.0, 23.0}) EXPECT_EQ(count_set(gt_occlusion(sc, 1, s)), 0u);
}

TEST(GtOcclusion, LargeTranslationLeavesABoundaryBand) {
  Scene sc = make_scene(96, 64, 100.0);
  sc.motion.velocity = {{1.5, 0, 0}, {0, 0, 0}};
  sc.validate();
  // frame 1 towards scanline 0: row y shifts right by f vx (gamma y / h) / Z,
  // up to 15 px at the bottom, uncovering a wedge along the left edge
  const Mask m = gt_occlusion(sc, 1, 0.0);
  EXPECT_GT(count_set(m), 0u);
  EXPECT_TRUE(m(0, 63));
  EXPECT_TRUE(m(10, 63));
  EXPECT_FALSE(m(0, 0));
  for (int y = 0; y < 64; ++y) EXPECT_FALSE(m(95, y));
}

TEST(GtOcclusion, AreaGrowsWithSpeed) {
  std::size_t previous = 0;
  for (double speed : {0.0, 0.2, 0.5, 1.0, 1.6}) {
    Scene sc = make_scene(96, 64, 100.0);
    sc.motion.velocity = {Eigen::Vector3d(0.8, 0.6, 0.0) * speed, {0, 0, 0}};
    const std::size_t area = count_set(gt_occlusion(sc, 2, 0.0));
    EXPECT_GE(area, previous) << "speed " << speed;
    previous = area;
  }
  EXPECT_GT(previous, 0u);
}

TEST(GtUndistortionFlow, RowAtTargetIsZeroAndGeometryAgreesToFirstOrder) {
  Scene sc = make_scene(96, 64, 100.0);
  sc.motion.velocity = {{0.3, 0.1, 0.0}, {0, 0, 0}};
  const FlowField u = gt_undistortion_flow(sc, 1, 20.0);
  for (int x = 0; x < 96; ++x) EXPECT_LE(u.data(x, 20).norm(), 1e-12);
  // pure lateral translation over a fronto-parallel plane: the differential
  // model is exact
  const FlowField d = undistortion_flow_from_geometry(sc.camera, sc.motion, sc.timing, compose_rs(sc, 1).depth, 20.0,
                                                      Direction::Forward);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 96; ++x) EXPECT_LE((u.data(x, y) - d.data(x, y)).norm(), 1e-9);
}

TEST(SceneValidate, RejectsBadScenes) {
  Scene sc = make_scene(32, 24, 40.0);
  sc.motion.k = -2.0;
  EXPECT_THROW(sc.validate(), Error);
  sc.motion.k = 0.0;
  sc.motion.velocity.v = {0, 8.0, 0};  // |gamma pi_v| = 40 * 8 / 10 > 24
  EXPECT_THROW(sc.validate(), Error);
  sc.motion.velocity.v = {0, 0, 0};
  sc.plane = {10.0, 0.0, 20.0};  // plane crosses the camera inside the view
  EXPECT_THROW(sc.validate(), Error);
}
