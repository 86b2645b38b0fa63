#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>

#include <unistd.h>

#include "rsgeom/rsgeom.hpp"

namespace rsgeom::testing {

/// Seeded generator for property tests; every test owns its own stream.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return std::bernoulli_distribution(0.5)(rng_); }
  Eigen::Vector3d vec3(double radius) {
    return {uniform(-radius, radius), uniform(-radius, radius), uniform(-radius, radius)};
  }
  Direction direction() { return coin() ? Direction::Forward : Direction::Backward; }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Smooth textured plane, 160x128 unless overridden, constant velocity.
inline Scene make_scene(int width = 160, int height = 128, double focal = 150.0, std::uint32_t seed = 3) {
  Scene sc;
  sc.camera = CameraModel::centered(width, height, focal);
  sc.texture = procedural_texture(width, height, std::max(width, height), seed);
  sc.plane = {10.0, 0.0, 0.0};
  sc.timing = {1.0};
  return sc;
}

inline Image constant_image(int w, int h, int channels, float value) {
  Image img(w, h, channels);
  for (auto& v : img.data()) v = value;
  return img;
}

inline Image noise_image(int w, int h, int channels, std::uint64_t seed) {
  Gen g(seed);
  Image img(w, h, channels);
  for (auto& v : img.data()) v = static_cast<float>(g.uniform(0.0, 1.0));
  return img;
}

/// Inversion input from simulated frames with ground-truth flow (and depth).
inline InversionInput gt_inversion_input(const Scene& sc, const RsFrame& rs1, const RsFrame& rs2, bool with_depth) {
  const BidirectionalFlow flow = gt_optical_flow(sc, rs1, rs2);
  InversionInput in{rs1.image, rs2.image, flow.forward, flow.backward, std::nullopt, std::nullopt, sc.camera, sc.timing};
  if (with_depth) {
    in.depth1 = rs1.depth;
    in.depth2 = rs2.depth;
  }
  return in;
}

/// Splat validity minus the ground-truth occlusion at the same scanline.
inline Mask evaluation_mask(const Scene& sc, const SplatResult& r, int frame, double s) {
  return mask_and(r.valid, mask_not(gt_occlusion(sc, frame, s)));
}

/// Runs fn and returns the ErrorCode it threw; fails the test if nothing was thrown.
template <typename Fn>
std::optional<ErrorCode> thrown_code(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

/// Fresh empty directory below the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  // per process: ctest runs test cases of one binary concurrently
  const auto dir = std::filesystem::temp_directory_path() /
                   ("rsgeom_test_" + std::to_string(::getpid()) + "_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace rsgeom::testing
