#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "test_support.hpp"

using namespace rsgeom;
using rsgeom::testing::make_scene;
using rsgeom::testing::thrown_code;

namespace {

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST(LucasKanade, IdenticalImagesGiveZeroFlow) {
  const Image img = render_gs(make_scene(96, 80, 100.0), 1, 0.0).image;
  const FlowField f = estimate_flow_lk(img, img);
  EXPECT_TRUE(f.is_optical_flow());
  for (int y = 0; y < 80; ++y)
    for (int x = 0; x < 96; ++x)
      if (f.valid(x, y)) {
        EXPECT_LE(f.data(x, y).norm(), 1e-6);
      }
}

TEST(LucasKanade, RecoversAGlobalShift) {
  const Image img1 = render_gs(make_scene(128, 96, 100.0), 1, 0.0).image;
  // img2(x) = img1(x - 2): content moves 2 px to the right
  FlowField shift(128, 96, std::nullopt, Direction::Forward);
  for (auto& v : shift.data.data()) v = {-2.0, 0.0};
  const Image img2 = backward_warp(img1, shift).image;
  const FlowField f = estimate_flow_lk(img1, img2);
  std::vector<double> u, v;
  for (int y = 8; y < 88; ++y)
    for (int x = 8; x < 120; ++x)
      if (f.valid(x, y)) {
        u.push_back(f.data(x, y).x());
        v.push_back(f.data(x, y).y());
      }
  ASSERT_GT(u.size(), 1000u);
  EXPECT_NEAR(median(u), 2.0, 0.2);
  EXPECT_NEAR(median(v), 0.0, 0.2);
}

TEST(LucasKanade, RsPairMatchesGroundTruth) {
  Scene sc = make_scene(160, 128, 150.0);
  sc.plane = {10.0, 0.02, 0.03};
  sc.motion.velocity = {{-0.5, 0.15, 0.05}, {0.002, -0.003, 0.004}};
  sc.validate();
  const RsFrame rs1 = compose_rs(sc, 1);
  const RsFrame rs2 = compose_rs(sc, 2);
  const BidirectionalFlow gt = gt_optical_flow(sc, rs1, rs2);
  const FlowField f = estimate_flow_lk(rs1.image, rs2.image);
  std::vector<double> epe;
  for (int y = 10; y < 118; ++y)
    for (int x = 10; x < 150; ++x)
      if (f.valid(x, y) && gt.forward.valid(x, y)) epe.push_back((f.data(x, y) - gt.forward.data(x, y)).norm());
  ASSERT_GT(epe.size(), 5000u);
  EXPECT_LE(median(epe), 0.5);
}

TEST(LucasKanade, Errors) {
  const Image a(20, 20, 3);
  EXPECT_EQ(thrown_code([&] { estimate_flow_lk(a, Image(20, 19, 3)); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(thrown_code([&] { estimate_flow_lk(a, a, {0, 11, 6, 1e-5}); }), ErrorCode::InvalidArgument);
}
