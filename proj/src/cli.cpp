#include "flowgeom/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "flowgeom/container.hpp"
#include "flowgeom/eval.hpp"
#include "flowgeom/geometry.hpp"
#include "flowgeom/losses.hpp"
#include "flowgeom/pose.hpp"
#include "flowgeom/sequence.hpp"
#include "flowgeom/synthetic.hpp"

namespace flowgeom::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

int exit_code_for(ErrorCode code) {
  if (is_numerical(code)) return kDegenerate;
  switch (code) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::Unsupported:
      return kUsage;
    default:
      return kIo;
  }
}

json metadata_of(const Container& c) { return json::parse(c.metadata); }

std::string pixel_convention_name(PixelConvention p) {
  return p == PixelConvention::Center ? "center" : "corner";
}

PixelConvention parse_pixel_convention(const std::string& s) {
  if (s == "center") return PixelConvention::Center;
  if (s == "corner") return PixelConvention::Corner;
  throw Error(ErrorCode::ConfigInvalid, "unknown pixel convention '" + s + "'");
}

Camera camera_from(const json& meta) {
  if (!meta.contains("camera")) throw Error(ErrorCode::CorruptFile, "metadata has no camera");
  const json& cam = meta["camera"];
  return Camera(cam.at("focal").get<double>(),
                Eigen::Vector2d(cam.at("cx").get<double>(), cam.at("cy").get<double>()));
}

// --- pair files ---

PropertyMaps read_pair_maps(const Container& c) {
  PropertyMapsCandidate raw;
  raw.points = get_points(c, "P");
  if (c.has("Pvt")) {
    raw.motion = get_points(c, "Pvt");
    raw.kind = MotionKind::MovedPoints;
  } else if (c.has("F")) {
    raw.motion = get_points(c, "F");
    raw.kind = MotionKind::SceneFlow;
  } else {
    throw Error(ErrorCode::CorruptFile, "pair file holds neither 'Pvt' nor 'F'");
  }
  raw.weights = get_scalar_map(c, "W");
  // Confidence plays no part in pose solving; files without it get C = 2.
  raw.confidence = c.has("C") ? get_scalar_map(c, "C") : Tensor2(raw.points.rows(), raw.points.cols(), 2.0);
  if (c.has("valid")) raw.valid = get_mask(c, "valid");
  return validate_property_maps(std::move(raw));
}

void write_pair(const fs::path& path, const SyntheticScene& scene, const PairGroundTruth& gt) {
  Container c;
  const SceneConfig& cfg = scene.config;
  json meta;
  meta["kind"] = "pair";
  meta["frame"] = gt.frame;
  meta["anchor_frame"] = 0;
  meta["camera"] = {{"focal", scene.camera.focal}, {"cx", scene.camera.center.x()}, {"cy", scene.camera.center.y()}};
  meta["pixel_convention"] = pixel_convention_name(cfg.convention);
  meta["seed"] = cfg.seed;
  meta["dynamic_fraction"] = cfg.dynamic_fraction;
  const std::size_t n_dynamic = count(scene.dynamic_mask);
  meta["dynamic_pixels"] = n_dynamic;
  meta["all_static"] = n_dynamic == 0;
  meta["is_dynamic"] = n_dynamic != 0;
  c.metadata = meta.dump();

  put_map(c, "P", gt.points);
  put_map(c, "Pvt", gt.moved);
  put_map(c, "W", gt.oracle_weights);
  put_map(c, "C", Tensor2(gt.points.rows(), gt.points.cols(), 2.0));
  put_mask(c, "valid", gt.valid);

  put_map(c, "P_gt", gt.points);
  put_map(c, "Pvt_gt", gt.moved);
  put_map(c, "pvt_gt", gt.moved_pixels);
  put_transform(c, "T_gt", gt.pose);
  put_map(c, "F_t_gt", gt.object_flow);
  put_map(c, "displacement_gt", gt.displacement);
  put_map(c, "depth", scene.depth[0]);
  put_mask(c, "M_P", gt.valid);
  put_mask(c, "M_F", gt.valid);
  put_mask(c, "M_f", gt.moved_pixels_valid);
  put_mask(c, "dynamic_mask", scene.dynamic_mask);
  write_container(path, c);
}

// --- synth ---

struct SynthOptions {
  std::string config_path;
  std::string out_dir;
  std::string hw;
  std::string convention;
  std::optional<std::uint64_t> seed;
  std::optional<int> frames;
  std::optional<double> focal, dynamic_fraction, displacement_max, rotation_max, translation_max;
  std::optional<double> depth_min, depth_max;
};

SceneConfig scene_config_from(const SynthOptions& o) {
  SceneConfig cfg;
  if (!o.config_path.empty()) {
    std::ifstream f(o.config_path);
    if (!f) throw Error(ErrorCode::ConfigInvalid, "cannot read config file " + o.config_path);
    json j = json::parse(f, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::ConfigInvalid, "config is not a JSON object");
    try {
      cfg.rows = j.value("rows", cfg.rows);
      cfg.cols = j.value("cols", cfg.cols);
      cfg.focal = j.value("focal", cfg.focal);
      cfg.depth_range[0] = j.value("depth_min", cfg.depth_range[0]);
      cfg.depth_range[1] = j.value("depth_max", cfg.depth_range[1]);
      cfg.dynamic_fraction = j.value("dynamic_fraction", cfg.dynamic_fraction);
      cfg.dynamic_displacement_max = j.value("displacement_max", cfg.dynamic_displacement_max);
      cfg.camera_rotation_max = j.value("rotation_max", cfg.camera_rotation_max);
      cfg.camera_translation_max = j.value("translation_max", cfg.camera_translation_max);
      cfg.n_frames = j.value("frames", cfg.n_frames);
      cfg.seed = j.value("seed", cfg.seed);
      if (j.contains("pixel_convention")) {
        cfg.convention = parse_pixel_convention(j["pixel_convention"].get<std::string>());
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigInvalid, std::string("config file: ") + e.what());
    }
  }
  if (!o.hw.empty()) {
    int h = 0;
    int w = 0;
    char x = 0;
    std::istringstream in(o.hw);
    if (!(in >> h >> x >> w) || (x != 'x' && x != 'X') || !in.eof()) {
      throw Error(ErrorCode::ConfigInvalid, "--hw expects HxW, got '" + o.hw + "'");
    }
    cfg.rows = h;
    cfg.cols = w;
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.frames) cfg.n_frames = *o.frames;
  if (o.focal) cfg.focal = *o.focal;
  if (o.dynamic_fraction) cfg.dynamic_fraction = *o.dynamic_fraction;
  if (o.displacement_max) cfg.dynamic_displacement_max = *o.displacement_max;
  if (o.rotation_max) cfg.camera_rotation_max = *o.rotation_max;
  if (o.translation_max) cfg.camera_translation_max = *o.translation_max;
  if (o.depth_min) cfg.depth_range[0] = *o.depth_min;
  if (o.depth_max) cfg.depth_range[1] = *o.depth_max;
  if (!o.convention.empty()) cfg.convention = parse_pixel_convention(o.convention);
  return cfg;
}

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  const SceneConfig cfg = scene_config_from(o);
  const SyntheticScene scene = generate(cfg);
  const fs::path dir(o.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

  for (const auto& gt : scene.pairs) {
    char name[32];
    std::snprintf(name, sizeof(name), "pair_%03d.f4r", gt.frame);
    write_pair(dir / name, scene, gt);
    out << (dir / name).string() << "\n";
  }

  TrackSet tracks;
  tracks.points.push_back(scene.anchor_points);
  tracks.valid.push_back(scene.pairs.front().valid);
  tracks.poses.push_back(RigidTransform::identity());
  for (const auto& gt : scene.pairs) {
    tracks.points.push_back(gt.tracks);
    tracks.valid.push_back(gt.valid);
    tracks.poses.push_back(gt.pose);
  }
  tracks.dynamic_mask = scene.dynamic_mask;
  Container c;
  json meta;
  meta["kind"] = "tracks";
  meta["source"] = "synthetic ground truth";
  meta["seed"] = cfg.seed;
  meta["frames"] = cfg.n_frames;
  meta["all_static"] = count(scene.dynamic_mask) == 0;
  meta["pixel_convention"] = pixel_convention_name(cfg.convention);
  c.metadata = meta.dump();
  put_tracks(c, tracks);
  write_container(dir / "tracks_gt.f4r", c);
  out << (dir / "tracks_gt.f4r").string() << "\n";
  return kOk;
}

// --- decompose ---

int cmd_decompose(const std::string& input, const std::string& output, const std::string& mode_name,
                  std::ostream& out) {
  const PoseMode mode = parse_pose_mode(mode_name);
  const Container in = read_container(input);
  const PropertyMaps maps = read_pair_maps(in);
  const FlowDecomposition d = decompose_flow(maps, mode);

  Container c;
  json meta;
  meta["kind"] = "decomposition";
  meta["solver_mode"] = std::string(to_string(mode));
  meta["residual"] = d.residual;
  meta["source"] = fs::path(input).filename().string();
  c.metadata = meta.dump();
  put_transform(c, "T_hat", d.pose);
  put_map(c, "F_v", d.rigid_flow);
  put_map(c, "F_t", d.object_flow);
  put_map(c, "P_v", d.rigid_points);
  put_map(c, "P_t", d.tracked);
  put_mask(c, "valid", maps.valid());
  c.put("residual", {1}, {static_cast<float>(d.residual)});
  write_container(output, c);
  out << "solver_mode=" << to_string(mode) << "\nresidual=" << number(d.residual) << "\n";
  return kOk;
}

// --- track ---

void write_ascii_tracks(const fs::path& path, const TrackSet& tracks) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  f << "# frame point_id x y z valid\n";
  for (std::size_t frame = 0; frame < tracks.n_frames(); ++frame) {
    for (std::size_t i = 0; i < tracks.points[frame].size(); ++i) {
      const Eigen::Vector3d& p = tracks.points[frame][i];
      f << frame << ' ' << i << ' ' << number(static_cast<float>(p.x())) << ' '
        << number(static_cast<float>(p.y())) << ' ' << number(static_cast<float>(p.z())) << ' '
        << (mask_at(tracks.valid[frame], i) ? 1 : 0) << '\n';
    }
  }
  if (!f) throw Error(ErrorCode::IoError, "write to " + path.string() + " failed");
}

int cmd_track(const std::vector<std::string>& inputs, const std::string& output, const std::string& ascii,
              const std::string& mode_name, const std::string& reference_name, std::ostream& out,
              std::ostream& err) {
  const PoseMode mode = parse_pose_mode(mode_name);
  ScaleReference reference;
  if (reference_name == "first") {
    reference = ScaleReference::FirstPair;
  } else if (reference_name == "median") {
    reference = ScaleReference::MedianPair;
  } else {
    throw Error(ErrorCode::ConfigInvalid, "unknown scale reference '" + reference_name + "'");
  }

  SequencePrediction seq;
  for (const auto& path : inputs) seq.pairs.push_back(read_pair_maps(read_container(path)));
  const ScaleAlignment alignment = align_scales(seq, reference);
  for (std::size_t n = 0; n < alignment.factors.size(); ++n) {
    err << "scale factor pair " << n + 1 << ": " << number(alignment.factors[n]) << "\n";
  }
  TrackResult result = build_tracks(alignment.aligned, mode);
  for (std::size_t n = 0; n < result.pairs.size(); ++n) {
    if (!result.pairs[n].ok) err << "warning: skipping pair " << n + 1 << ": " << result.pairs[n].message << "\n";
  }
  if (result.valid_pairs() == 0) {
    err << "error: no pair could be decomposed\n";
    return kDegenerate;
  }

  Container c;
  json meta;
  meta["kind"] = "tracks";
  meta["solver_mode"] = std::string(to_string(mode));
  meta["scale_reference"] = reference_name;
  meta["scale_factors"] = alignment.factors;
  std::vector<bool> ok;
  for (const auto& s : result.pairs) ok.push_back(s.ok);
  meta["pair_ok"] = ok;
  c.metadata = meta.dump();
  put_tracks(c, result.tracks);
  write_container(output, c);
  if (!ascii.empty()) write_ascii_tracks(ascii, result.tracks);
  out << "frames=" << result.tracks.n_frames() << "\nvalid_pairs=" << result.valid_pairs() << "\n";
  return kOk;
}

// --- eval ---

std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size()) {
      throw Error(ErrorCode::ConfigInvalid, "bad threshold '" + item + "'");
    }
    out.push_back(v);
  }
  return out;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path, const std::string& thresholds,
             int max_frames, const std::string& alignment, const std::string& report_path, std::ostream& out) {
  MetricConfig cfg;
  cfg.thresholds = parse_thresholds(thresholds);
  cfg.max_frames = max_frames;
  cfg.alignment = parse_alignment(alignment);
  cfg.validate();
  const TrackSet pred = get_tracks(read_container(pred_path));
  const TrackSet gt = get_tracks(read_container(gt_path));
  const std::string text = to_key_value(apd3d(pred, gt, cfg));
  out << text;
  if (!report_path.empty()) {
    std::ofstream f(report_path);
    if (!f || !(f << text)) throw Error(ErrorCode::IoError, "cannot write " + report_path);
  }
  return kOk;
}

// --- loss-check ---

struct LossCheckOptions {
  std::string input;
  std::string mode = "closed_form";
  std::string weight_gradient = "analytic";
  double step = 1e-5;
  std::size_t samples = 64;
  std::uint64_t seed = 0;
  double perturb = 0.01;
  bool normalize = false;
  std::optional<bool> dynamic;
};

LossInputs loss_inputs_from(const Container& c, bool normalize) {
  LossInputs in;
  in.points = get_points(c, "P");
  in.moved = c.has("Pvt") ? get_points(c, "Pvt") : [&] {
    Tensor3 f = get_points(c, "F");
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += in.points[i];
    return f;
  }();
  in.weights = get_scalar_map(c, "W");
  in.confidence = get_scalar_map(c, "C");
  if (c.has("valid")) in.solve_mask = get_mask(c, "valid");
  const json meta = metadata_of(c);
  in.camera = camera_from(meta);
  in.points_gt = c.has("P_gt") ? get_points(c, "P_gt") : Tensor3(in.points.rows(), in.points.cols());
  in.moved_gt = c.has("Pvt_gt") ? get_points(c, "Pvt_gt") : Tensor3(in.points.rows(), in.points.cols());
  in.moved_pixels_gt = c.has("pvt_gt") ? get_pixels(c, "pvt_gt") : PixelMap(in.points.rows(), in.points.cols());
  in.pose_gt = c.has("T_gt") ? get_transform(c, "T_gt") : RigidTransform::identity();
  if (c.has("M_P") && c.has("P_gt") && c.has("T_gt")) in.mask_points = get_mask(c, "M_P");
  if (c.has("M_F") && c.has("Pvt_gt")) in.mask_motion = get_mask(c, "M_F");
  if (c.has("M_f") && c.has("pvt_gt")) in.mask_pixels = get_mask(c, "M_f");

  if (normalize) {
    const Tensor3 pred_maps[] = {in.points, in.moved};
    const Mask pred_masks[] = {in.solve_mask, in.solve_mask};
    NormalizedPoints pred = normalize_points(pred_maps, pred_masks);
    in.points = std::move(pred.maps[0]);
    in.moved = std::move(pred.maps[1]);
    const Tensor3 gt_maps[] = {in.points_gt, in.moved_gt};
    const Mask gt_masks[] = {in.mask_points, in.mask_points};
    NormalizedPoints gt = normalize_points(gt_maps, gt_masks);
    in.points_gt = std::move(gt.maps[0]);
    in.moved_gt = std::move(gt.maps[1]);
    in.pose_gt = RigidTransform(in.pose_gt.rotation(), in.pose_gt.translation() / gt.scale);
  }
  return in;
}

int cmd_loss_check(const LossCheckOptions& o, std::ostream& out) {
  const Container c = read_container(o.input);
  const json meta = metadata_of(c);
  LossInputs in = loss_inputs_from(c, o.normalize);
  // Residual norms have a kink at zero, so ground-truth inputs are moved off
  // it before differencing.
  if (o.perturb > 0.0) {
    std::mt19937_64 rng(o.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> noise(0.0, o.perturb);
    for (std::size_t i = 0; i < in.points.size(); ++i) {
      for (int k = 0; k < 3; ++k) {
        in.points[i](k) += noise(rng);
        in.moved[i](k) += noise(rng);
      }
      in.confidence[i] += std::abs(noise(rng)) / o.perturb;
    }
  }
  LossConfig cfg;
  cfg.is_dynamic = o.dynamic.value_or(meta.value("is_dynamic", false));
  cfg.pose_mode = parse_pose_mode(o.mode);
  if (o.weight_gradient == "analytic") {
    cfg.weight_gradient = WeightGradientMode::Analytic;
  } else if (o.weight_gradient == "fd") {
    cfg.weight_gradient = WeightGradientMode::FiniteDifference;
  } else {
    throw Error(ErrorCode::ConfigInvalid, "unknown weight gradient mode '" + o.weight_gradient + "'");
  }
  if (!(o.perturb >= 0.0)) throw Error(ErrorCode::ConfigInvalid, "--perturb must be non-negative");

  const LossReport report = total_loss(in, cfg);
  out << "loss.point=" << number(report.point) << (report.point_active ? "" : " (no supervision)") << "\n"
      << "loss.motion3d=" << number(report.motion3d) << (report.motion3d_active ? "" : " (no supervision)") << "\n"
      << "loss.motion2d=" << number(report.motion2d) << (report.motion2d_active ? "" : " (no supervision)") << "\n"
      << "loss.pose_weight=" << number(report.pose_weight) << (report.pose_weight_active ? "" : " (no supervision)") << "\n"
      << "loss.rigid_motion=" << number(report.rigid_motion) << (report.rigid_motion_active ? "" : " (no supervision)") << "\n"
      << "loss.total=" << number(report.total) << "\n"
      << "is_dynamic=" << (cfg.is_dynamic ? "true" : "false") << "\n";

  const std::vector<GradientCheckRow> rows = check_gradients(in, cfg, o.step, o.samples, o.seed);
  out << "\ntensor    entries  max_abs_err  max_rel_err  status\n";
  for (const auto& r : rows) {
    const bool pass = r.relative_error() <= 1e-4;
    char line[160];
    std::snprintf(line, sizeof(line), "%-9s %7zu  %11.3e  %11.3e  %s\n", r.tensor.c_str(), r.entries,
                  r.max_abs_error, r.relative_error(), pass ? "PASS" : "FAIL");
    out << line;
  }
  return kOk;
}

// --- export-ply ---

int cmd_export_ply(const std::string& input, const std::string& tensor, const std::string& output,
                   std::string mask_name, std::string color_name, std::ostream& out) {
  const Container c = read_container(input);
  const TensorEntry& e = c.at(tensor);
  if (e.shape.empty() || e.shape.back() != 3) {
    throw Error(ErrorCode::ShapeMismatch, "tensor '" + tensor + "' does not hold 3D points");
  }
  const std::size_t n = e.data.size() / 3;

  auto matching = [&](const std::string& name) -> const TensorEntry* {
    if (name.empty() || name == "none" || !c.has(name)) return nullptr;
    const TensorEntry& m = c.at(name);
    return m.data.size() == n ? &m : nullptr;
  };
  if (mask_name.empty()) mask_name = tensor == "tracks" ? "track_valid" : "valid";
  if (color_name.empty()) color_name = "C";
  const TensorEntry* mask = matching(mask_name);
  const TensorEntry* color = matching(color_name);

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask && mask->data[i] == 0.0f) continue;
    if (!std::isfinite(e.data[3 * i]) || !std::isfinite(e.data[3 * i + 1]) || !std::isfinite(e.data[3 * i + 2])) continue;
    keep.push_back(i);
  }
  float lo = 0.0f;
  float hi = 0.0f;
  if (color && !keep.empty()) {
    lo = hi = color->data[keep.front()];
    for (std::size_t i : keep) {
      lo = std::min(lo, color->data[i]);
      hi = std::max(hi, color->data[i]);
    }
  }

  std::ostringstream ply;
  ply << "ply\nformat ascii 1.0\nelement vertex " << keep.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n";
  if (color) ply << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  ply << "end_header\n";
  for (std::size_t i : keep) {
    ply << number(e.data[3 * i]) << ' ' << number(e.data[3 * i + 1]) << ' ' << number(e.data[3 * i + 2]);
    if (color) {
      const double t = hi > lo ? (static_cast<double>(color->data[i]) - lo) / (static_cast<double>(hi) - lo) : 1.0;
      const int g = static_cast<int>(std::lround(255.0 * t));
      ply << ' ' << g << ' ' << g << ' ' << g;
    }
    ply << '\n';
  }
  std::ofstream f(output);
  if (!f || !(f << ply.str())) throw Error(ErrorCode::IoError, "cannot write " + output);
  out << "vertices=" << keep.size() << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scene-flow geometry toolkit: pose solving, flow decomposition, tracking, metrics and losses"};
  app.require_subcommand(1);

  SynthOptions synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic ground-truth sequence");
  s->add_option("--config", synth.config_path, "JSON scene config; flags override it");
  s->add_option("--out", synth.out_dir, "Output directory")->required();
  s->add_option("--seed", synth.seed, "Random seed");
  s->add_option("--frames", synth.frames, "Number of frames (>= 2)");
  s->add_option("--hw", synth.hw, "Image size as HxW");
  s->add_option("--focal", synth.focal, "Focal length in pixels");
  s->add_option("--dynamic-fraction", synth.dynamic_fraction, "Fraction of moving pixels");
  s->add_option("--displacement-max", synth.displacement_max, "Largest object displacement (m)");
  s->add_option("--rotation-max", synth.rotation_max, "Largest camera rotation (rad)");
  s->add_option("--translation-max", synth.translation_max, "Largest camera translation (m)");
  s->add_option("--depth-min", synth.depth_min, "Near depth bound (m)");
  s->add_option("--depth-max", synth.depth_max, "Far depth bound (m)");
  s->add_option("--pixel-convention", synth.convention, "center|corner");

  std::string dec_in, dec_out, mode = "closed_form";
  auto* d = app.add_subcommand("decompose", "Solve pose and split scene flow into rigid and object motion");
  d->add_option("input", dec_in, "Pair container")->required();
  d->add_option("--out", dec_out, "Output container")->required();
  d->add_option("--mode", mode, "closed_form|irls");

  std::vector<std::string> track_in;
  std::string track_out, track_ascii, track_ref = "first";
  auto* t = app.add_subcommand("track", "Align anchored pairs and build world-space tracks");
  t->add_option("inputs", track_in, "Pair containers (I0,I1), (I0,I2), ... in order")->required();
  t->add_option("--out", track_out, "Output track container")->required();
  t->add_option("--ascii", track_ascii, "Also write ASCII trajectories here");
  t->add_option("--mode", mode, "closed_form|irls");
  t->add_option("--scale-reference", track_ref, "first|median");

  std::string eval_pred, eval_gt, eval_thr = "0.1,0.3,0.5,1.0", eval_align = "median_scale", eval_report;
  int max_frames = 64;
  auto* e = app.add_subcommand("eval", "APD3D and EPE of predicted tracks");
  e->add_option("pred", eval_pred, "Predicted track container")->required();
  e->add_option("gt", eval_gt, "Ground-truth track container")->required();
  e->add_option("--thresholds", eval_thr, "Comma-separated thresholds in meters");
  e->add_option("--max-frames", max_frames, "Frames evaluated");
  e->add_option("--alignment", eval_align, "median_scale|none");
  e->add_option("--out", eval_report, "Also write the report here");

  LossCheckOptions lc;
  bool lc_dynamic = false;
  bool lc_static = false;
  auto* l = app.add_subcommand("loss-check", "Evaluate the training losses and compare gradients to finite differences");
  l->add_option("input", lc.input, "Container with prediction and ground truth")->required();
  l->add_option("--mode", lc.mode, "closed_form|irls");
  l->add_option("--weight-gradient", lc.weight_gradient, "analytic|fd");
  l->add_option("--step", lc.step, "Central difference step");
  l->add_option("--fd-samples", lc.samples, "Entries checked per tensor (0 = all)");
  l->add_option("--seed", lc.seed, "Seed for perturbation and entry sampling");
  l->add_option("--perturb", lc.perturb, "Gaussian noise (m) added to P and Pvt before checking");
  l->add_flag("--normalize", lc.normalize, "Normalize prediction and ground truth by mean norm first");
  auto* dyn_flag = l->add_flag("--dynamic", lc_dynamic, "Treat the pair as dynamic");
  l->add_flag("--static", lc_static, "Treat the pair as static")->excludes(dyn_flag);

  std::string ply_in, ply_tensor = "P", ply_out, ply_mask, ply_color;
  auto* p = app.add_subcommand("export-ply", "Write a tensor of 3D points as an ASCII PLY point cloud");
  p->add_option("input", ply_in, "Container")->required();
  p->add_option("--tensor", ply_tensor, "Tensor name");
  p->add_option("--out", ply_out, "Output .ply")->required();
  p->add_option("--mask", ply_mask, "Validity tensor (default: valid / track_valid)");
  p->add_option("--color-by", ply_color, "Scalar tensor mapped to grey levels (default: C, 'none' to disable)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (d->parsed()) return cmd_decompose(dec_in, dec_out, mode, out);
    if (t->parsed()) return cmd_track(track_in, track_out, track_ascii, mode, track_ref, out, err);
    if (e->parsed()) return cmd_eval(eval_pred, eval_gt, eval_thr, max_frames, eval_align, eval_report, out);
    if (l->parsed()) {
      if (lc_dynamic) lc.dynamic = true;
      if (lc_static) lc.dynamic = false;
      return cmd_loss_check(lc, out);
    }
    if (p->parsed()) return cmd_export_ply(ply_in, ply_tensor, ply_out, ply_mask, ply_color, out);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return exit_code_for(ex.code());
  } catch (const json::exception& ex) {
    err << "error: CorruptFile: metadata: " << ex.what() << "\n";
    return kIo;
  }
  return kUsage;
}

}  // namespace flowgeom::cli
