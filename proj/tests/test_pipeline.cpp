#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace rsgeom;
using rsgeom::testing::evaluation_mask;
using rsgeom::testing::gt_inversion_input;
using rsgeom::testing::make_scene;
using rsgeom::testing::thrown_code;

namespace {

struct Fixture {
  Scene sc;
  RsFrame rs1, rs2;
  InversionInput in;
};

Fixture fixture(double k = 0.0) {
  Fixture f;
  f.sc = make_scene(160, 128, 150.0, 9);
  f.sc.plane = {10.0, 0.02, 0.03};
  f.sc.motion.velocity = {{-0.6, 0.15, 0.05}, {0.002, -0.003, 0.004}};
  f.sc.motion.k = k;
  f.sc.validate();
  f.rs1 = compose_rs(f.sc, 1);
  f.rs2 = compose_rs(f.sc, 2);
  f.in = gt_inversion_input(f.sc, f.rs1, f.rs2, true);
  return f;
}

}  // namespace

TEST(ScanlineGrid, Spacing) {
  const CameraModel cam = CameraModel::centered(40, 33, 50.0);
  EXPECT_EQ(scanline_grid(1, cam), std::vector<double>{16.5});
  EXPECT_EQ(scanline_grid(2, cam), (std::vector<double>{0.0, 32.0}));
  const auto nine = scanline_grid(9, cam);
  ASSERT_EQ(nine.size(), 9u);
  for (int i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(nine[i], 4.0 * i);
  EXPECT_EQ(thrown_code([&] { scanline_grid(0, cam); }), ErrorCode::InvalidArgument);
}

TEST(Invert, MiddleScanlineRecoversTheGlobalShutterView) {
  const Fixture f = fixture();
  const double m = f.sc.camera.middle_scanline();
  const auto out = invert(f.in, {m}, {});
  ASSERT_EQ(out.size(), 1u);
  const Image gs1 = render_gs(f.sc, 1, m).image;
  const Image gs2 = render_gs(f.sc, 2, m).image;
  const Mask m1 = evaluation_mask(f.sc, out[0].forward, 1, m);
  const Mask m2 = evaluation_mask(f.sc, out[0].backward, 2, m);
  EXPECT_GE(psnr(out[0].forward.image, gs1, &m1), 40.0);
  EXPECT_GE(psnr(out[0].backward.image, gs2, &m2), 40.0);
  EXPECT_GE(ssim(out[0].forward.image, gs1, &m1), 0.98);
}

TEST(Invert, OtherScanlinesAndThePoleRow) {
  const Fixture f = fixture();
  for (double s : {0.0, 64.0, 127.0, 33.5}) {
    const auto out = invert(f.in, {s}, {});
    const Image gs1 = render_gs(f.sc, 1, s).image;
    const Mask m1 = evaluation_mask(f.sc, out[0].forward, 1, s);
    EXPECT_GE(psnr(out[0].forward.image, gs1, &m1), 35.0) << s;
  }
}

TEST(Invert, ZeroPhiIsTheVelocityModelBitForBit) {
  const Fixture f = fixture();
  InversionOptions vel;
  InversionOptions acc;
  acc.phi_forward = 0.0;
  acc.phi_backward = -0.0;
  const auto a = invert(f.in, {0.0, 50.0, 127.0}, vel);
  const auto b = invert(f.in, {0.0, 50.0, 127.0}, acc);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].forward.image, b[i].forward.image);
    EXPECT_EQ(a[i].backward.image, b[i].backward.image);
    EXPECT_EQ(a[i].forward.valid, b[i].forward.valid);
  }
}

TEST(Invert, ThreadCountDoesNotChangeTheResult) {
  const Fixture f = fixture();
  const auto grid = scanline_grid(9, f.sc.camera);
  InversionOptions opt;
  opt.splat.weight_mode = WeightMode::Brightness;
  const auto one = invert(f.in, grid, opt, 1);
  const auto many = invert(f.in, grid, opt, 4);
  ASSERT_EQ(one.size(), many.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].scanline, grid[i]);
    EXPECT_EQ(many[i].scanline, grid[i]);
    EXPECT_EQ(one[i].forward.image, many[i].forward.image);
    EXPECT_EQ(one[i].backward.image, many[i].backward.image);
  }
}

TEST(Invert, WeightsFallBackToBrightnessWithoutDepth) {
  Fixture f = fixture();
  f.in.depth2.reset();
  const SplatWeights w = splat_weights(f.in, {});
  ASSERT_TRUE(w.forward.has_value());
  EXPECT_EQ(*w.forward, brightness_weights(f.in.rs1, f.in.rs2, f.in.forward));
  InversionOptions uniform;
  uniform.splat.weight_mode = WeightMode::Uniform;
  EXPECT_FALSE(splat_weights(f.in, uniform).forward.has_value());
}

TEST(Invert, RejectsBadInput) {
  Fixture f = fixture();
  EXPECT_EQ(thrown_code([&] { invert(f.in, {-1.0}, {}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(thrown_code([&] { invert(f.in, {128.0}, {}); }), ErrorCode::InvalidArgument);
  InversionInput swapped = f.in;
  std::swap(swapped.forward, swapped.backward);
  EXPECT_EQ(thrown_code([&] { invert(swapped, {0.0}, {}); }), ErrorCode::InvalidArgument);
  InversionInput small = f.in;
  small.rs2 = Image(10, 10, 3);
  EXPECT_EQ(thrown_code([&] { invert(small, {0.0}, {}); }), ErrorCode::DimensionMismatch);
  // errors inside worker threads reach the caller
  EXPECT_EQ(thrown_code([&] { invert(f.in, {0.0, 10.0, 500.0, 20.0}, {}, 3); }), ErrorCode::InvalidArgument);
}

TEST(UndistortionFlowAt, PoleRowUsesTheLimit) {
  const Fixture f = fixture();
  const MiddleFlows mid = middle_undistortion_flows(f.in);
  const double m = f.sc.camera.middle_scanline();
  const int pole = static_cast<int>(m);
  const FlowField u = undistortion_flow_at(mid.forward, f.in.forward, 10.0, std::nullopt, f.sc.camera, f.sc.timing);
  const FlowField exact = gt_undistortion_flow(f.sc, 1, 10.0);
  for (int x = 20; x < 140; ++x) {
    ASSERT_TRUE(u.valid(x, pole));
    EXPECT_NEAR(u.data(x, pole).x(), exact.data(x, pole).x(), 0.05);
    EXPECT_NEAR(u.data(x, pole).y(), exact.data(x, pole).y(), 0.05);
    // continuity with the neighbouring rows
    EXPECT_NEAR(u.data(x, pole).y(), 0.5 * (u.data(x, pole - 1).y() + u.data(x, pole + 1).y()), 0.05);
  }
}
