#include <optional>
#include <string>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flowgeom/error.hpp"
#include "flowgeom/eval.hpp"
#include "flowgeom/losses.hpp"
#include "flowgeom/pose.hpp"
#include "flowgeom/synthetic.hpp"

namespace py = pybind11;
using namespace flowgeom;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using MaskArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;

std::string shape_of(const py::array& a) {
  std::string s = "(";
  for (py::ssize_t k = 0; k < a.ndim(); ++k) s += (k ? ", " : "") + std::to_string(a.shape(k));
  return s + (a.ndim() == 1 ? ",)" : ")");
}

[[noreturn]] void bad_shape(const char* name, const std::string& expected, const py::array& a) {
  throw py::value_error(std::string(name) + ": expected shape " + expected + ", got " + shape_of(a));
}

Tensor3 to_points(const Array& a, const char* name) {
  if (a.ndim() != 3 || a.shape(2) != 3 || a.shape(0) < 1 || a.shape(1) < 1) bad_shape(name, "(H, W, 3)", a);
  Tensor3 out(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  const double* d = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = Eigen::Vector3d(d[3 * i], d[3 * i + 1], d[3 * i + 2]);
  return out;
}

PixelMap to_pixels(const Array& a, const char* name) {
  if (a.ndim() != 3 || a.shape(2) != 2 || a.shape(0) < 1 || a.shape(1) < 1) bad_shape(name, "(H, W, 2)", a);
  PixelMap out(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  const double* d = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = Eigen::Vector2d(d[2 * i], d[2 * i + 1]);
  return out;
}

Tensor2 to_scalars(const Array& a, const char* name) {
  if (a.ndim() != 2 || a.shape(0) < 1 || a.shape(1) < 1) bad_shape(name, "(H, W)", a);
  Tensor2 out(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + out.size(), out.values().begin());
  return out;
}

Mask to_mask(const std::optional<MaskArray>& a, const char* name) {
  if (!a) return {};
  if (a->ndim() != 2 || a->shape(0) < 1 || a->shape(1) < 1) bad_shape(name, "(H, W)", *a);
  Mask out(static_cast<int>(a->shape(0)), static_cast<int>(a->shape(1)));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data()[i] ? 1 : 0;
  return out;
}

RigidTransform to_transform(const Array& a) {
  if (a.ndim() != 2 || a.shape(0) != 3 || a.shape(1) != 4) bad_shape("T_gt", "(3, 4)", a);
  const auto m = a.unchecked<2>();
  Eigen::Matrix3d r;
  Eigen::Vector3d t;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r(i, j) = m(i, j);
    t(i) = m(i, 3);
  }
  return RigidTransform(r, t);
}

Array from_points(const Tensor3& t) {
  Array out({static_cast<py::ssize_t>(t.rows()), static_cast<py::ssize_t>(t.cols()), py::ssize_t{3}});
  double* d = out.mutable_data();
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (int k = 0; k < 3; ++k) d[3 * i + k] = t[i](k);
  }
  return out;
}

Array from_scalars(const Tensor2& t) {
  Array out({static_cast<py::ssize_t>(t.rows()), static_cast<py::ssize_t>(t.cols())});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

MaskArray from_mask(const Mask& m) {
  MaskArray out({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
  for (std::size_t i = 0; i < m.size(); ++i) out.mutable_data()[i] = m[i] != 0;
  return out;
}

Array from_transform(const RigidTransform& t) {
  Array out({py::ssize_t{3}, py::ssize_t{4}});
  const auto m = t.matrix();
  auto v = out.mutable_unchecked<2>();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) v(i, j) = m(i, j);
  }
  return out;
}

TrackSet to_tracks(const Array& points, const std::optional<MaskArray>& valid, const char* name) {
  if (points.ndim() != 4 || points.shape(3) != 3 || points.shape(0) < 1) bad_shape(name, "(N, H, W, 3)", points);
  const auto n = points.shape(0);
  const auto h = points.shape(1);
  const auto w = points.shape(2);
  if (valid && (valid->ndim() != 3 || valid->shape(0) != n || valid->shape(1) != h || valid->shape(2) != w)) {
    bad_shape(name, "(N, H, W) validity", *valid);
  }
  TrackSet t;
  const double* d = points.data();
  for (py::ssize_t f = 0; f < n; ++f) {
    Tensor3 frame(static_cast<int>(h), static_cast<int>(w));
    Mask m(static_cast<int>(h), static_cast<int>(w), 1);
    for (std::size_t i = 0; i < frame.size(); ++i) {
      const double* p = d + (f * h * w + static_cast<py::ssize_t>(i)) * 3;
      frame[i] = Eigen::Vector3d(p[0], p[1], p[2]);
      if (valid) m[i] = valid->data()[f * h * w + static_cast<py::ssize_t>(i)] ? 1 : 0;
    }
    t.points.push_back(std::move(frame));
    t.valid.push_back(std::move(m));
    t.poses.push_back(RigidTransform::identity());
  }
  return t;
}

py::dict subset(const SubsetMetrics& s) {
  py::dict d;
  d["apd"] = s.apd;
  d["apd_mean"] = s.apd_mean;
  d["epe"] = s.epe;
  d["n_points"] = s.n_points;
  return d;
}

py::dict decompose(const Array& points, const Array& motion, const Array& weights,
                   const std::optional<MaskArray>& valid, const std::string& mode, bool motion_is_flow) {
  const PoseMode pose_mode = parse_pose_mode(mode);
  PropertyMapsCandidate raw;
  raw.points = to_points(points, "P");
  raw.motion = to_points(motion, motion_is_flow ? "F" : "Pvt");
  raw.kind = motion_is_flow ? MotionKind::SceneFlow : MotionKind::MovedPoints;
  raw.weights = to_scalars(weights, "W");
  raw.confidence = Tensor2(raw.points.rows(), raw.points.cols(), 2.0);
  raw.valid = to_mask(valid, "valid");
  FlowDecomposition d;
  {
    py::gil_scoped_release release;
    d = decompose_flow(validate_property_maps(std::move(raw)), pose_mode);
  }
  py::dict out;
  out["T_hat"] = from_transform(d.pose);
  out["F_v"] = from_points(d.rigid_flow);
  out["F_t"] = from_points(d.object_flow);
  out["P_v"] = from_points(d.rigid_points);
  out["P_t"] = from_points(d.tracked);
  out["residual"] = d.residual;
  out["solver_mode"] = std::string(to_string(d.mode));
  return out;
}

py::dict evaluate(const Array& pred, const Array& gt, const std::optional<MaskArray>& pred_valid,
                  const std::optional<MaskArray>& gt_valid, const std::optional<MaskArray>& dynamic_mask,
                  const std::vector<double>& thresholds, int max_frames, const std::string& alignment) {
  MetricConfig cfg;
  cfg.thresholds = thresholds;
  cfg.max_frames = max_frames;
  cfg.alignment = parse_alignment(alignment);
  const TrackSet p = to_tracks(pred, pred_valid, "pred");
  TrackSet g = to_tracks(gt, gt_valid, "gt");
  g.dynamic_mask = to_mask(dynamic_mask, "dynamic_mask");
  const MetricReport r = apd3d(p, g, cfg);
  py::dict out;
  out["thresholds"] = r.thresholds;
  out["alignment"] = std::string(to_string(r.alignment));
  out["scale_applied"] = r.scale_applied;
  out["n_frames"] = r.n_frames;
  out["all"] = subset(r.all);
  if (r.dynamic) out["dynamic"] = subset(*r.dynamic);
  out["report"] = to_key_value(r);
  return out;
}

py::dict loss(const Array& points, const Array& moved, const Array& weights, const Array& confidence,
              const Array& points_gt, const Array& moved_gt, const Array& pixels_gt, const Array& pose_gt,
              double focal, double cx, double cy, const std::optional<MaskArray>& mask_points,
              const std::optional<MaskArray>& mask_motion, const std::optional<MaskArray>& mask_pixels,
              bool is_dynamic, const std::string& mode) {
  LossInputs in;
  in.points = to_points(points, "P");
  in.moved = to_points(moved, "Pvt");
  in.weights = to_scalars(weights, "W");
  in.confidence = to_scalars(confidence, "C");
  in.points_gt = to_points(points_gt, "P_gt");
  in.moved_gt = to_points(moved_gt, "Pvt_gt");
  in.moved_pixels_gt = to_pixels(pixels_gt, "pvt_gt");
  in.pose_gt = to_transform(pose_gt);
  in.camera = Camera(focal, Eigen::Vector2d(cx, cy));
  in.mask_points = to_mask(mask_points, "M_P");
  in.mask_motion = to_mask(mask_motion, "M_F");
  in.mask_pixels = to_mask(mask_pixels, "M_f");
  LossConfig cfg;
  cfg.is_dynamic = is_dynamic;
  cfg.pose_mode = parse_pose_mode(mode);
  if (cfg.pose_mode == PoseMode::Irls) cfg.weight_gradient = WeightGradientMode::FiniteDifference;
  LossReport r;
  {
    py::gil_scoped_release release;
    r = total_loss(in, cfg);
  }
  py::dict out;
  out["point"] = r.point;
  out["motion3d"] = r.motion3d;
  out["motion2d"] = r.motion2d;
  out["pose_weight"] = r.pose_weight;
  out["rigid_motion"] = r.rigid_motion;
  out["total"] = r.total;
  out["grad_P"] = from_points(r.grad_points);
  out["grad_Pvt"] = from_points(r.grad_moved);
  out["grad_W"] = from_scalars(r.grad_weights);
  out["grad_C"] = from_scalars(r.grad_confidence);
  return out;
}

py::list synthesize(std::uint64_t seed, int rows, int cols, int frames, double dynamic_fraction,
                    double displacement_max) {
  SceneConfig cfg;
  cfg.seed = seed;
  cfg.rows = rows;
  cfg.cols = cols;
  cfg.n_frames = frames;
  cfg.dynamic_fraction = dynamic_fraction;
  cfg.dynamic_displacement_max = displacement_max;
  const SyntheticScene scene = generate(cfg);
  py::list pairs;
  for (const PairGroundTruth& gt : scene.pairs) {
    PixelMap px = gt.moved_pixels;
    Array pixels({static_cast<py::ssize_t>(rows), static_cast<py::ssize_t>(cols), py::ssize_t{2}});
    for (std::size_t i = 0; i < px.size(); ++i) {
      pixels.mutable_data()[2 * i] = px[i].x();
      pixels.mutable_data()[2 * i + 1] = px[i].y();
    }
    py::dict d;
    d["frame"] = gt.frame;
    d["P"] = from_points(gt.points);
    d["Pvt"] = from_points(gt.moved);
    d["F_t"] = from_points(gt.object_flow);
    d["tracks"] = from_points(gt.tracks);
    d["pvt"] = pixels;
    d["W"] = from_scalars(gt.oracle_weights);
    d["valid"] = from_mask(gt.valid);
    d["T_gt"] = from_transform(gt.pose);
    d["dynamic_mask"] = from_mask(scene.dynamic_mask);
    d["focal"] = scene.camera.focal;
    d["cx"] = scene.camera.center.x();
    d["cy"] = scene.camera.center.y();
    pairs.append(d);
  }
  return pairs;
}

}  // namespace

PYBIND11_MODULE(_flowgeom, m) {
  m.doc() = "Scene-flow geometry core: pose solving, flow decomposition, metrics and losses";
  static py::exception<Error> error(m, "FlowgeomError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  m.def("decompose", &decompose, py::arg("P"), py::arg("motion"), py::arg("W"), py::arg("valid") = py::none(),
        py::arg("mode") = "closed_form", py::arg("motion_is_flow") = false,
        "Solve T̂ from (P, Pvt, W) and split the scene flow into rigid and object parts.");
  m.def("evaluate", &evaluate, py::arg("pred"), py::arg("gt"), py::arg("pred_valid") = py::none(),
        py::arg("gt_valid") = py::none(), py::arg("dynamic_mask") = py::none(),
        py::arg("thresholds") = std::vector<double>{0.1, 0.3, 0.5, 1.0}, py::arg("max_frames") = 64,
        py::arg("alignment") = "median_scale", "APD3D and EPE of (N, H, W, 3) track arrays.");
  m.def("total_loss", &loss, py::arg("P"), py::arg("Pvt"), py::arg("W"), py::arg("C"), py::arg("P_gt"),
        py::arg("Pvt_gt"), py::arg("pvt_gt"), py::arg("T_gt"), py::arg("focal"), py::arg("cx"), py::arg("cy"),
        py::arg("M_P") = py::none(), py::arg("M_F") = py::none(), py::arg("M_f") = py::none(),
        py::arg("is_dynamic") = false, py::arg("mode") = "closed_form",
        "Training loss terms, total and gradients.");
  m.def("synthesize", &synthesize, py::arg("seed") = 0, py::arg("rows") = 64, py::arg("cols") = 64,
        py::arg("frames") = 2, py::arg("dynamic_fraction") = 0.3, py::arg("displacement_max") = 1.0,
        "Ground-truth anchored pairs of a synthetic scene.");
}
