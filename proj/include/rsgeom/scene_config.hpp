#pragma once

// YAML scene description -> Scene. Schema (all keys optional unless noted):
//
//   texture:    procedural | procedural:<seed> | <path to 8-bit PNG>
//   plane_depth: <z0>                          (fronto-parallel plane), or
//   depth_ramp: {z0: <z>, dz_dx: <a>, dz_dy: <b>}   (plane Z = z0 + a X + b Y)
//   focal:      <pixels>                       (required)
//   principal:  [cx, cy]                       (default: image centre)
//   width:      <int>                          (required)
//   height:     <int>                          (required, scanlines)
//   gamma:      <(0, 1]>                       (default 1)
//   v:          [vx, vy, vz]                   (per frame interval)
//   omega:      [wx, wy, wz]                   (radians per frame interval)
//   k:          <[-1.9, 10]>                   (default 0)
//   frames:     <int >= 2>                     (default 2)
//
// Unknown keys are rejected. Errors carry "<file>:<line>:" context.

#include <filesystem>
#include <set>
#include <string>

#include <yaml-cpp/yaml.h>

#include "rsgeom/io.hpp"
#include "rsgeom/scene.hpp"

namespace rsgeom {

struct SceneConfig {
  Scene scene;
  std::string texture_spec = "procedural";
  bool depth_ramp = false;
};

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void error(const YAML::Node& node, const std::string& msg) const {
    const int line = node.IsDefined() ? node.Mark().line + 1 : 0;
    fail(ErrorCode::ConfigError, source_ + ":" + std::to_string(line) + ": " + msg);
  }

  template <typename T>
  T scalar(const YAML::Node& node, const std::string& key) const {
    if (!node.IsScalar()) error(node, key + ": expected a scalar");
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      error(node, key + ": cannot parse '" + node.Scalar() + "'");
    }
  }

  template <int N>
  Eigen::Matrix<double, N, 1> vec(const YAML::Node& node, const std::string& key) const {
    if (!node.IsSequence() || node.size() != N) error(node, key + ": expected a list of " + std::to_string(N));
    Eigen::Matrix<double, N, 1> out;
    for (int i = 0; i < N; ++i) out(i) = scalar<double>(node[i], key);
    return out;
  }

  const std::string& source() const { return source_; }

 private:
  std::string source_;
};

}  // namespace detail

/// Builds a scene from YAML text. `base_dir` resolves relative texture paths.
inline SceneConfig parse_scene_config(const std::string& text, const std::string& source = "<config>",
                                      const std::filesystem::path& base_dir = ".") {
  const detail::ConfigReader rd(source);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    fail(ErrorCode::ConfigError, source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) fail(ErrorCode::ConfigError, source + ": top level must be a mapping");

  static const std::set<std::string> known{"texture", "plane_depth", "depth_ramp", "focal", "principal", "width",
                                           "height",  "gamma",       "v",          "omega", "k",         "frames"};
  for (const auto& kv : root) {
    const std::string key = kv.first.as<std::string>();
    if (!known.count(key)) rd.error(kv.first, "unknown key '" + key + "'");
  }
  auto required = [&](const char* key) {
    const YAML::Node n = root[key];
    if (!n) fail(ErrorCode::ConfigError, source + ": missing required key '" + key + "'");
    return n;
  };

  SceneConfig cfg;
  Scene& sc = cfg.scene;
  const int width = rd.scalar<int>(required("width"), "width");
  const int height = rd.scalar<int>(required("height"), "height");
  const double focal = rd.scalar<double>(required("focal"), "focal");
  if (width < 2 || height < 2) rd.error(root["width"], "width and height must be >= 2");
  if (!(focal > 0.0)) rd.error(root["focal"], "focal must be positive");
  sc.camera = CameraModel::centered(width, height, focal);
  if (root["principal"]) sc.camera.principal_point = rd.vec<2>(root["principal"], "principal");

  if (root["plane_depth"] && root["depth_ramp"]) rd.error(root["depth_ramp"], "give plane_depth or depth_ramp, not both");
  if (const YAML::Node n = root["plane_depth"]) {
    sc.plane.z0 = rd.scalar<double>(n, "plane_depth");
    if (!(sc.plane.z0 > 0.0)) rd.error(n, "plane_depth must be positive");
  }
  if (const YAML::Node n = root["depth_ramp"]) {
    if (!n.IsMap()) rd.error(n, "depth_ramp: expected a mapping");
    for (const auto& kv : n) {
      const std::string key = kv.first.as<std::string>();
      if (key != "z0" && key != "dz_dx" && key != "dz_dy") rd.error(kv.first, "unknown depth_ramp key '" + key + "'");
    }
    if (!n["z0"]) rd.error(n, "depth_ramp needs z0");
    sc.plane.z0 = rd.scalar<double>(n["z0"], "depth_ramp.z0");
    if (n["dz_dx"]) sc.plane.dz_dx = rd.scalar<double>(n["dz_dx"], "depth_ramp.dz_dx");
    if (n["dz_dy"]) sc.plane.dz_dy = rd.scalar<double>(n["dz_dy"], "depth_ramp.dz_dy");
    if (!(sc.plane.z0 > 0.0)) rd.error(n["z0"], "depth_ramp.z0 must be positive");
    cfg.depth_ramp = true;
  }

  if (const YAML::Node n = root["gamma"]) {
    sc.timing.gamma = rd.scalar<double>(n, "gamma");
    if (!(sc.timing.gamma > 0.0 && sc.timing.gamma <= 1.0)) rd.error(n, "gamma must lie in (0, 1]");
  }
  if (const YAML::Node n = root["v"]) sc.motion.velocity.v = rd.vec<3>(n, "v");
  if (const YAML::Node n = root["omega"]) sc.motion.velocity.omega = rd.vec<3>(n, "omega");
  if (const YAML::Node n = root["k"]) {
    sc.motion.k = rd.scalar<double>(n, "k");
    if (!(sc.motion.k >= kMinAcceleration && sc.motion.k <= kMaxAcceleration)) rd.error(n, "k must lie in [-1.9, 10]");
  }
  if (const YAML::Node n = root["frames"]) {
    sc.frame_count = rd.scalar<int>(n, "frames");
    if (sc.frame_count < 2) rd.error(n, "frames must be >= 2");
  }

  if (const YAML::Node n = root["texture"]) cfg.texture_spec = rd.scalar<std::string>(n, "texture");
  const std::string& tex = cfg.texture_spec;
  const int margin = std::max(width, height);
  if (tex == "procedural" || tex.rfind("procedural:", 0) == 0) {
    std::uint32_t seed = 1;
    if (tex.size() > 11) {
      try {
        seed = static_cast<std::uint32_t>(std::stoul(tex.substr(11)));
      } catch (const std::logic_error&) {
        rd.error(root["texture"], "bad procedural seed '" + tex.substr(11) + "'");
      }
    }
    sc.texture = procedural_texture(width, height, margin, seed);
  } else {
    std::filesystem::path p(tex);
    if (p.is_relative()) p = base_dir / p;
    try {
      sc.texture.image = io::read_png(p);
    } catch (const Error& e) {
      rd.error(root["texture"], e.what());
    }
    sc.texture.origin = {0.5 * (sc.texture.image.width() - width), 0.5 * (sc.texture.image.height() - height)};
  }
  try {
    sc.validate();
  } catch (const Error& e) {
    if (e.is_io()) throw;
    fail(ErrorCode::ConfigError, source + ": " + e.what());
  }
  return cfg;
}

inline SceneConfig load_scene_config(const std::filesystem::path& path) {
  const auto bytes = io::detail::read_all(path);
  return parse_scene_config(std::string(bytes.begin(), bytes.end()), path.string(), path.parent_path());
}

}  // namespace rsgeom
