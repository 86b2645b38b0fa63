// rsgeom command line: simulate | invert | eval | selfcheck.
// Exit codes: 0 success, 1 validation failure, 2 IO / config / usage error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rsgeom/rsgeom.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace rsgeom;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

std::string scanline_tag(double s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%07.2f", s);
  return buf;
}

std::string gs_name(int frame, double s) { return "gs_" + std::to_string(frame) + "_" + scanline_tag(s) + ".png"; }

unsigned thread_count() {
  if (const char* env = std::getenv("RSGEOM_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return static_cast<unsigned>(n);
    } catch (const std::logic_error&) {
    }
    fail(ErrorCode::ConfigError, std::string("RSGEOM_THREADS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot create " + path.string());
  out << j.dump(2) << "\n";
}

std::vector<double> parse_scanlines(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      fail(ErrorCode::ConfigError, "bad scanline '" + item + "'");
    }
  }
  if (out.empty()) fail(ErrorCode::ConfigError, "empty scanline list");
  return out;
}

/// Explicit --scanlines wins, then --count, then the middle scanline alone.
std::vector<double> requested_scanlines(const std::string& list, int count, const CameraModel& cam) {
  std::vector<double> s = !list.empty() ? parse_scanlines(list)
                          : count > 0   ? scanline_grid(count, cam)
                                        : std::vector<double>{cam.middle_scanline()};
  for (double v : s)
    if (!(v >= 0.0 && v <= cam.h() - 1.0)) fail(ErrorCode::InvalidArgument, "scanline outside [0, h-1]");
  return s;
}

json vec_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string out;
  std::string scanlines;
  int count = 0;
};

int cmd_simulate(const SimulateArgs& a) {
  const SceneConfig cfg = load_scene_config(a.config);
  const Scene& sc = cfg.scene;
  const CameraModel& cam = sc.camera;
  const fs::path out(a.out);
  fs::create_directories(out);
  const std::vector<double> scanlines = !a.scanlines.empty() || a.count > 0
                                            ? requested_scanlines(a.scanlines, a.count, cam)
                                            : std::vector<double>{0.0, cam.middle_scanline()};

  json manifest;
  manifest["scene"] = {
      {"config", fs::path(a.config).filename().string()},
      {"texture", cfg.texture_spec},
      {"width", cam.width},
      {"height", cam.height},
      {"focal", cam.focal_length},
      {"principal", json::array({cam.principal_point.x(), cam.principal_point.y()})},
      {"gamma", sc.timing.gamma},
      {"v", vec_json(sc.motion.velocity.v)},
      {"omega", vec_json(sc.motion.velocity.omega)},
      {"k", sc.motion.k},
      {"plane", {{"z0", sc.plane.z0}, {"dz_dx", sc.plane.dz_dx}, {"dz_dy", sc.plane.dz_dy}}},
      {"frames", sc.frame_count},
  };

  std::vector<RsFrame> rs;
  for (int n = 1; n <= sc.frame_count; ++n) {
    rs.push_back(compose_rs(sc, n));
    const std::string img = "rs_" + std::to_string(n) + ".png";
    const std::string depth = "depth_" + std::to_string(n) + ".pfm";
    const std::string occ = "rs_occlusion_" + std::to_string(n) + ".png";
    io::write_png(out / img, rs.back().image);
    io::write_pfm(out / depth, rs.back().depth);
    io::write_mask_png(out / occ, rs.back().occlusion_mask);
    manifest["rs_frames"].push_back({{"frame", n}, {"image", img}, {"depth", depth}, {"occlusion", occ}});
  }
  for (int n = 1; n < sc.frame_count; ++n) {
    const BidirectionalFlow flows = gt_optical_flow(sc, rs[n - 1], rs[n]);
    const std::string fwd = "flow_fwd_" + std::to_string(n) + ".flo";
    const std::string bwd = "flow_bwd_" + std::to_string(n) + ".flo";
    io::write_flo(out / fwd, flows.forward);
    io::write_flo(out / bwd, flows.backward);
    manifest["flows"].push_back({{"from", n}, {"to", n + 1}, {"direction", "forward"}, {"file", fwd}});
    manifest["flows"].push_back({{"from", n + 1}, {"to", n}, {"direction", "backward"}, {"file", bwd}});
  }
  for (int n = 1; n <= sc.frame_count; ++n) {
    for (double s : scanlines) {
      const GsFrame gs = render_gs(sc, n, s);
      const std::string img = gs_name(n, s);
      const std::string occ = "occlusion_" + std::to_string(n) + "_" + scanline_tag(s) + ".png";
      io::write_png(out / img, gs.image);
      io::write_mask_png(out / occ, gt_occlusion(sc, n, s));
      manifest["gs_frames"].push_back(
          {{"frame", n}, {"scanline", s}, {"pose_weight", gs.pose_weight}, {"image", img}, {"occlusion", occ}});
    }
  }
  write_json(out / "manifest.json", manifest);
  std::cout << "wrote " << sc.frame_count << " RS frames, " << 2 * (sc.frame_count - 1) << " flows, "
            << scanlines.size() * sc.frame_count << " GS frames to " << out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct InvertArgs {
  std::string rs1, rs2;
  double gamma = 0.0;
  std::string flow_source = "lk";
  std::string flow_fwd, flow_bwd;
  std::string scene;
  std::string depth_source = "none";
  std::string depth1, depth2;
  std::string scanlines;
  int count = 0;
  std::string model = "velocity";
  std::optional<double> phi;
  std::optional<double> phi2;
  bool fit = false;
  std::string reference1, reference2;
  double reference_s = 0.0;
  std::string weights = "auto";
  double sharpness = 10.0;
  bool fill = false;
  std::string out;
};

int cmd_invert(const InvertArgs& a) {
  InversionInput in;
  in.rs1 = io::read_png(a.rs1);
  in.rs2 = io::read_png(a.rs2);
  if (!in.rs1.same_shape(in.rs2)) fail(ErrorCode::DimensionMismatch, "RS frames differ in size");
  in.timing = {a.gamma};
  in.timing.validate();

  std::optional<SceneConfig> scene;
  if (!a.scene.empty()) scene = load_scene_config(a.scene);
  // only the image size matters for inversion; the focal length is carried for completeness
  in.camera = scene ? scene->scene.camera
                    : CameraModel::centered(in.rs1.width(), in.rs1.height(), static_cast<double>(in.rs1.width()));
  if (in.camera.width != in.rs1.width() || in.camera.height != in.rs1.height()) {
    fail(ErrorCode::DimensionMismatch, "scene camera does not match the RS frames");
  }

  std::optional<RsFrame> sim1, sim2;
  if (a.flow_source == "gt" || a.depth_source == "gt") {
    if (!scene) fail(ErrorCode::ConfigError, "--scene is required for ground-truth flow or depth");
    sim1 = compose_rs(scene->scene, 1);
    sim2 = compose_rs(scene->scene, 2);
  }
  if (a.flow_source == "gt") {
    BidirectionalFlow flows = gt_optical_flow(scene->scene, *sim1, *sim2);
    in.forward = std::move(flows.forward);
    in.backward = std::move(flows.backward);
  } else if (a.flow_source == "files") {
    if (a.flow_fwd.empty() || a.flow_bwd.empty()) fail(ErrorCode::ConfigError, "--flow files needs --flow-fwd and --flow-bwd");
    in.forward = io::read_flo(a.flow_fwd, Direction::Forward);
    in.backward = io::read_flo(a.flow_bwd, Direction::Backward);
  } else {
    in.forward = estimate_flow_lk(in.rs1, in.rs2);
    in.backward = estimate_flow_lk(in.rs2, in.rs1);
    in.backward.direction = Direction::Backward;
  }

  if (a.depth_source == "gt") {
    in.depth1 = sim1->depth;
    in.depth2 = sim2->depth;
  } else if (a.depth_source == "files") {
    if (a.depth1.empty() || a.depth2.empty()) fail(ErrorCode::ConfigError, "--depth files needs --depth1 and --depth2");
    in.depth1 = io::read_pfm(a.depth1);
    in.depth2 = io::read_pfm(a.depth2);
  }

  InversionOptions opt;
  opt.splat.sharpness = a.sharpness;
  opt.splat.hole_policy = a.fill ? HolePolicy::NearestFill : HolePolicy::MarkInvalid;
  if (a.weights == "uniform") {
    opt.splat.weight_mode = WeightMode::Uniform;
  } else if (a.weights == "brightness") {
    opt.splat.weight_mode = WeightMode::Brightness;
  } else if (a.weights == "depth") {
    if (!in.depth1) fail(ErrorCode::ConfigError, "--weights depth needs a depth source");
    opt.splat.weight_mode = WeightMode::InverseDepth;
  } else {
    opt.splat.weight_mode = in.depth1 ? WeightMode::InverseDepth : WeightMode::Brightness;
  }

  json report;
  if (a.model == "acceleration") {
    if (a.fit) {
      if (a.reference1.empty() || a.reference2.empty()) {
        fail(ErrorCode::MissingReference, "--fit needs --reference1 and --reference2");
      }
      const Image ref1 = io::read_png(a.reference1);
      const Image ref2 = io::read_png(a.reference2);
      in.validate();
      const MiddleFlows mid = middle_undistortion_flows(in);
      const PhiEstimate est = estimate_phi(in.rs1, in.rs2, mid.forward, mid.backward, a.reference_s, ref1, ref2,
                                           in.camera);
      opt.phi_forward = est.forward.phi;
      opt.phi_backward = est.backward.phi;
      report["fit"] = {{"reference_scanline", a.reference_s},
                       {"phi1", est.forward.phi},
                       {"phi2", est.backward.phi},
                       {"objective1", est.forward.objective},
                       {"objective2", est.backward.objective},
                       {"non_improving1", est.forward.non_improving},
                       {"non_improving2", est.backward.non_improving}};
      for (const PhiFit* f : {&est.forward, &est.backward})
        if (f->non_improving) std::cerr << "warning: NonImprovingFit: best phi is no better than phi = 0\n";
    } else if (a.phi) {
      opt.phi_forward = *a.phi;
      // same physical acceleration seen with the negated readout ratio
      opt.phi_backward = a.phi2 ? *a.phi2 : -*a.phi;
    } else {
      fail(ErrorCode::InvalidArgument, "--model acceleration needs --phi or --fit");
    }
  } else if (a.phi || a.fit) {
    fail(ErrorCode::InvalidArgument, "--phi / --fit require --model acceleration");
  }

  const std::vector<double> scanlines = requested_scanlines(a.scanlines, a.count, in.camera);
  const std::vector<GsEstimate> results = invert(in, scanlines, opt, thread_count());

  const fs::path out(a.out);
  fs::create_directories(out);
  report["gamma"] = a.gamma;
  report["model"] = a.model;
  report["flow"] = a.flow_source;
  if (opt.phi_forward) report["phi"] = {*opt.phi_forward, *opt.phi_backward};
  for (const GsEstimate& e : results) {
    const std::string tag = scanline_tag(e.scanline);
    io::write_png(out / gs_name(1, e.scanline), e.forward.image);
    io::write_png(out / gs_name(2, e.scanline), e.backward.image);
    io::write_mask_png(out / ("mask_1_" + tag + ".png"), e.forward.valid);
    io::write_mask_png(out / ("mask_2_" + tag + ".png"), e.backward.valid);
    report["frames"].push_back({{"scanline", e.scanline},
                                {"forward", gs_name(1, e.scanline)},
                                {"backward", gs_name(2, e.scanline)},
                                {"valid_forward", count_set(e.forward.valid)},
                                {"valid_backward", count_set(e.backward.valid)}});
  }
  write_json(out / "invert.json", report);
  std::cout << "wrote " << results.size() << " frame pairs to " << out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string mask = "both";
  std::string report;
};

int cmd_eval(const EvalArgs& a) {
  auto list = [](const fs::path& dir) {
    if (!fs::is_directory(dir)) fail(ErrorCode::IoError, "not a directory: " + dir.string());
    std::set<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string n = entry.path().filename().string();
      if (n.rfind("gs_", 0) == 0 && entry.path().extension() == ".png") names.insert(n);
    }
    return names;
  };
  const std::set<std::string> pred = list(a.pred);
  const std::set<std::string> gt = list(a.gt);
  std::vector<std::string> missing;
  for (const auto& n : pred)
    if (!gt.count(n)) missing.push_back(n);
  if (pred.empty() || !missing.empty()) {
    fail(ErrorCode::MismatchedFrameSets,
         pred.empty() ? "no predicted frames" : "no ground truth for " + missing.front());
  }
  const bool with = a.mask != "without";
  const bool without = a.mask != "with";

  json report;
  report["pred"] = a.pred;
  report["gt"] = a.gt;
  double sum[4] = {0, 0, 0, 0};
  std::printf("%-28s %10s %8s %10s %8s\n", "frame", "psnr", "ssim", "psnr_m", "ssim_m");
  for (const auto& n : pred) {
    const Image p = io::read_png(fs::path(a.pred) / n);
    const Image g = io::read_png(fs::path(a.gt) / n);
    if (!p.same_shape(g)) fail(ErrorCode::MismatchedFrameSets, "size differs for " + n);
    json fr{{"frame", n}};
    double v[4] = {0, 0, 0, 0};
    if (without) {
      v[0] = psnr(p, g);
      v[1] = ssim(p, g);
      fr["psnr"] = v[0];
      fr["ssim"] = v[1];
    }
    if (with) {
      // gs_F_S.png -> mask_F_S.png (prediction validity), occlusion_F_S.png (GT occlusion)
      const std::string rest = n.substr(3);
      Mask m(p.width(), p.height(), 1);
      const fs::path pm = fs::path(a.pred) / ("mask_" + rest);
      const fs::path go = fs::path(a.gt) / ("occlusion_" + rest);
      if (fs::exists(pm)) m = mask_and(m, io::read_mask_png(pm));
      if (fs::exists(go)) m = mask_and(m, mask_not(io::read_mask_png(go)));
      v[2] = psnr(p, g, &m);
      v[3] = ssim(p, g, &m);
      fr["psnr_masked"] = v[2];
      fr["ssim_masked"] = v[3];
      fr["masked_pixels"] = count_set(m);
    }
    for (int i = 0; i < 4; ++i) sum[i] += v[i];
    std::printf("%-28s %10.4f %8.5f %10.4f %8.5f\n", n.c_str(), v[0], v[1], v[2], v[3]);
    report["frames"].push_back(fr);
  }
  const double cnt = static_cast<double>(pred.size());
  json mean;
  if (without) mean["psnr"] = sum[0] / cnt, mean["ssim"] = sum[1] / cnt;
  if (with) mean["psnr_masked"] = sum[2] / cnt, mean["ssim_masked"] = sum[3] / cnt;
  report["mean"] = mean;
  std::printf("%-28s %10.4f %8.5f %10.4f %8.5f\n", "mean", sum[0] / cnt, sum[1] / cnt, sum[2] / cnt, sum[3] / cnt);
  if (!a.report.empty()) write_json(a.report, report);
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_selfcheck(std::uint64_t seed, const std::string& report_path) {
  SelfcheckOptions opt;
  opt.seed = seed;
  const std::vector<CheckResult> results = run_selfcheck(opt);
  bool ok = true;
  json report;
  std::printf("%-44s %-6s %10s %9s  %s\n", "check", "status", "samples", "seconds", "detail");
  for (const auto& r : results) {
    ok = ok && r.passed;
    std::printf("%-44s %-6s %10zu %9.3f  %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL", r.samples, r.seconds,
                r.detail.c_str());
    report.push_back({{"check", r.name},
                      {"passed", r.passed},
                      {"samples", r.samples},
                      {"worst", r.worst},
                      {"tolerance", r.tolerance},
                      {"seconds", r.seconds}});
  }
  if (!report_path.empty()) write_json(report_path, report);
  std::printf("selfcheck: %s\n", ok ? "all checks passed" : "FAILED");
  return ok ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rolling-shutter geometry toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "render an RS pair, GT GS frames, flows, depth and masks");
  simulate->add_option("--config,-c", sim.config, "scene YAML")->required();
  simulate->add_option("--out,-o", sim.out, "output directory")->required();
  simulate->add_option("--scanlines", sim.scanlines, "comma-separated GT scanlines (default 0 and h/2)");
  simulate->add_option("--count", sim.count, "N evenly spaced GT scanlines over [0, h-1]");

  InvertArgs inv;
  auto* invert_cmd = app.add_subcommand("invert", "recover GS frames at given scanlines from an RS pair");
  invert_cmd->add_option("--rs1", inv.rs1, "first RS frame (PNG)")->required();
  invert_cmd->add_option("--rs2", inv.rs2, "second RS frame (PNG)")->required();
  invert_cmd->add_option("--gamma", inv.gamma, "readout time ratio in (0, 1]")->required();
  invert_cmd->add_option("--flow", inv.flow_source, "flow source")->check(CLI::IsMember({"gt", "lk", "files"}));
  invert_cmd->add_option("--flow-fwd", inv.flow_fwd, ".flo RS1 -> RS2");
  invert_cmd->add_option("--flow-bwd", inv.flow_bwd, ".flo RS2 -> RS1");
  invert_cmd->add_option("--scene", inv.scene, "scene YAML (for gt flow / depth)");
  invert_cmd->add_option("--depth", inv.depth_source, "depth source")->check(CLI::IsMember({"none", "gt", "files"}));
  invert_cmd->add_option("--depth1", inv.depth1, "PFM depth of RS1");
  invert_cmd->add_option("--depth2", inv.depth2, "PFM depth of RS2");
  invert_cmd->add_option("--scanlines", inv.scanlines, "comma-separated target scanlines");
  invert_cmd->add_option("--count", inv.count, "N evenly spaced target scanlines over [0, h-1]");
  invert_cmd->add_option("--model", inv.model, "propagation model")
      ->check(CLI::IsMember({"velocity", "acceleration"}));
  invert_cmd->add_option("--phi", inv.phi, "acceleration parameter of the forward path");
  invert_cmd->add_option("--phi2", inv.phi2, "acceleration parameter of the backward path (default -phi)");
  invert_cmd->add_flag("--fit", inv.fit, "fit phi against reference GS frames");
  invert_cmd->add_option("--reference1", inv.reference1, "GS reference of frame 1 at --reference-s");
  invert_cmd->add_option("--reference2", inv.reference2, "GS reference of frame 2 at --reference-s");
  invert_cmd->add_option("--reference-s", inv.reference_s, "scanline of the references (default 0)");
  invert_cmd->add_option("--weights", inv.weights, "splat importance")
      ->check(CLI::IsMember({"auto", "uniform", "depth", "brightness"}));
  invert_cmd->add_option("--sharpness", inv.sharpness, "splat softmax sharpness");
  invert_cmd->add_flag("--fill", inv.fill, "fill holes with the nearest valid colour");
  invert_cmd->add_option("--out,-o", inv.out, "output directory")->required();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "PSNR / SSIM of predicted against GT GS frames");
  eval->add_option("--pred", ev.pred, "directory with predicted gs_*.png")->required();
  eval->add_option("--gt", ev.gt, "directory with GT gs_*.png")->required();
  eval->add_option("--mask", ev.mask, "metric variants")->check(CLI::IsMember({"with", "without", "both"}));
  eval->add_option("--report", ev.report, "JSON report path");

  std::uint64_t seed = SelfcheckOptions{}.seed;
  std::string check_report;
  auto* selfcheck = app.add_subcommand("selfcheck", "run the invariant suite");
  selfcheck->add_option("--seed", seed, "random seed");
  selfcheck->add_option("--report", check_report, "JSON report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitIo;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*invert_cmd) return cmd_invert(inv);
    if (*eval) return cmd_eval(ev);
    if (*selfcheck) return cmd_selfcheck(seed, check_report);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_io() ? kExitIo : kExitValidation;
  } catch (const YAML::Exception& e) {
    std::cerr << "error: ConfigError: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: IoError: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitValidation;
}
