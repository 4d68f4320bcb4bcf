#include "flowgeom/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "flowgeom/geometry.hpp"

namespace flowgeom {

namespace {

std::size_t require_support(const Mask& mask, const char* term) {
  const std::size_t n = mask.empty() ? 0 : count(mask);
  if (n == 0) throw Error(ErrorCode::EmptyMask, std::string(term) + " has no supervised pixels");
  return n;
}

// d‖r‖/dr with the zero subgradient at r = 0.
Eigen::Vector3d unit_or_zero(const Eigen::Vector3d& r) {
  const double n = r.norm();
  return n > 0.0 ? Eigen::Vector3d(r / n) : Eigen::Vector3d::Zero();
}

ConfidenceLoss confidence_loss(const Tensor3& x, const Tensor3& x_gt, const Tensor2& confidence,
                               const Mask& mask, double alpha, const char* term) {
  require_same_shape(x, x_gt, "target map");
  require_same_shape(x, confidence, "confidence map");
  require_same_shape(x, mask, "supervision mask");
  const double inv_n = 1.0 / static_cast<double>(require_support(mask, term));

  ConfidenceLoss out{0.0, Tensor3(x.rows(), x.cols()), Tensor2(x.rows(), x.cols())};
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!mask[i]) continue;
    const Eigen::Vector3d r = x[i] - x_gt[i];
    const double c = confidence[i];
    const double dist = r.norm();
    out.value += c * dist - alpha * std::log(c);
    out.grad_points[i] = inv_n * c * unit_or_zero(r);
    out.grad_confidence[i] = inv_n * (dist - alpha / c);
  }
  out.value *= inv_n;
  return out;
}

struct PoseWeightEval {
  double value = 0.0;
  Eigen::Matrix3d grad_rotation = Eigen::Matrix3d::Zero();
  Eigen::Vector3d grad_translation = Eigen::Vector3d::Zero();
};

// Loss value of a given T̂ plus its gradient with respect to (R, t).
PoseWeightEval evaluate_pose(const RigidTransform& pose, const Tensor3& points,
                             const std::vector<Eigen::Vector3d>& targets, const Mask& mask,
                             double inv_n) {
  PoseWeightEval out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!mask[i]) continue;
    const Eigen::Vector3d r = pose * points[i] - targets[i];
    out.value += r.norm();
    const Eigen::Vector3d g = unit_or_zero(r);
    out.grad_rotation += g * points[i].transpose();
    out.grad_translation += g;
  }
  out.value *= inv_n;
  out.grad_rotation *= inv_n;
  out.grad_translation *= inv_n;
  return out;
}

RigidTransform solve_from(Correspondences corr, PoseMode mode) {
  ProcrustesFit fit = fit_weighted_procrustes(corr);
  if (mode == PoseMode::ClosedForm) return fit.transform;
  const std::vector<double> base = corr.weights;
  RigidTransform pose = fit.transform;
  for (int iter = 0; iter < kIrlsMaxIterations; ++iter) {
    for (std::size_t k = 0; k < corr.src.size(); ++k) {
      corr.weights[k] = base[k] / std::max((corr.dst[k] - pose * corr.src[k]).norm(), kIrlsResidualFloor);
    }
    const RigidTransform next = fit_weighted_procrustes(corr).transform;
    const double change = rotation_error(next, pose);
    pose = next;
    if (change < kIrlsRotationTolerance) break;
  }
  return pose;
}

}  // namespace

ConfidenceLoss loss_point(const Tensor3& points, const Tensor3& points_gt, const Tensor2& confidence,
                          const Mask& mask, double alpha) {
  return confidence_loss(points, points_gt, confidence, mask, alpha, "point loss");
}

ConfidenceLoss loss_motion3d(const Tensor3& moved, const Tensor3& moved_gt, const Tensor2& confidence,
                             const Mask& mask, double alpha) {
  return confidence_loss(moved, moved_gt, confidence, mask, alpha, "3D motion loss");
}

ProjectionLoss loss_motion2d(const Tensor3& moved, const Camera& camera, const PixelMap& moved_pixels_gt,
                             const Mask& mask) {
  require_same_shape(moved, moved_pixels_gt, "target pixel map");
  require_same_shape(moved, mask, "supervision mask");
  const double inv_n = 1.0 / static_cast<double>(require_support(mask, "2D motion loss"));
  const double f = camera.focal;

  ProjectionLoss out{0.0, Tensor3(moved.rows(), moved.cols())};
  for (std::size_t i = 0; i < moved.size(); ++i) {
    if (!mask[i]) continue;
    const Eigen::Vector3d& x = moved[i];
    const auto projected = project_point(x, camera);
    if (!projected) {
      throw Error(ErrorCode::InvalidProjection,
                  "supervised pixel " + std::to_string(i) + " has depth " + std::to_string(x.z()));
    }
    const Eigen::Vector2d e = *projected - moved_pixels_gt[i];
    const double dist = e.norm();
    out.value += dist;
    if (dist == 0.0) continue;
    const double inv_z = 1.0 / x.z();
    Eigen::Matrix<double, 2, 3> jac;
    jac << f * inv_z, 0.0, -f * x.x() * inv_z * inv_z,
           0.0, f * inv_z, -f * x.y() * inv_z * inv_z;
    out.grad_moved[i] = inv_n * jac.transpose() * (e / dist);
  }
  out.value *= inv_n;
  return out;
}

PoseWeightLoss loss_pose_weight(const Tensor3& points, const Tensor3& moved, const Tensor2& weights,
                                const Tensor3& points_gt, const RigidTransform& pose_gt, const Mask& mask,
                                const Mask& solve_mask, PoseMode mode, WeightGradientMode gradient,
                                double fd_step) {
  require_same_shape(points, points_gt, "target point map");
  require_same_shape(points, mask, "supervision mask");
  const double inv_n = 1.0 / static_cast<double>(require_support(mask, "pose weight loss"));

  const Correspondences corr = gather_correspondences(points, moved, weights, solve_mask);
  std::vector<Eigen::Vector3d> targets(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) targets[i] = pose_gt * points_gt[i];

  PoseWeightLoss out;
  out.grad_weights = Tensor2(points.rows(), points.cols());
  out.grad_points = Tensor3(points.rows(), points.cols());
  out.grad_moved = Tensor3(points.rows(), points.cols());

  if (gradient == WeightGradientMode::Analytic && mode == PoseMode::ClosedForm) {
    const ProcrustesFit fit = fit_weighted_procrustes(corr);
    out.pose = fit.transform;
    const PoseWeightEval eval = evaluate_pose(out.pose, points, targets, mask, inv_n);
    out.value = eval.value;
    const std::vector<double> g =
        procrustes_weight_gradient(fit, corr, eval.grad_rotation, eval.grad_translation);
    for (std::size_t k = 0; k < corr.pixel.size(); ++k) out.grad_weights[corr.pixel[k]] = g[k];
    return out;
  }

  if (gradient == WeightGradientMode::None) {
    out.pose = solve_from(corr, mode);
    out.value = evaluate_pose(out.pose, points, targets, mask, inv_n).value;
    return out;
  }

  // Reference path: central differences on each weight (also the only path
  // for the reweighted solver, which has no closed-form derivative).
  out.pose = solve_from(corr, mode);
  out.value = evaluate_pose(out.pose, points, targets, mask, inv_n).value;
  Correspondences probe = corr;
  for (std::size_t k = 0; k < corr.pixel.size(); ++k) {
    const double w = corr.weights[k];
    probe.weights[k] = w + fd_step;
    const double up = evaluate_pose(solve_from(probe, mode), points, targets, mask, inv_n).value;
    probe.weights[k] = w - fd_step;
    const double down = evaluate_pose(solve_from(probe, mode), points, targets, mask, inv_n).value;
    probe.weights[k] = w;
    out.grad_weights[corr.pixel[k]] = (up - down) / (2.0 * fd_step);
  }
  return out;
}

RigidMotionLoss loss_rigid_motion(const Tensor3& moved, const Tensor3& rigid_points_gt,
                                  const Tensor2& confidence, const Tensor2& weights, const Mask& mask,
                                  bool is_dynamic, double alpha) {
  require_same_shape(moved, rigid_points_gt, "target map");
  require_same_shape(moved, confidence, "confidence map");
  require_same_shape(moved, mask, "supervision mask");
  if (is_dynamic) require_same_shape(moved, weights, "pose weight map");
  const double inv_n = 1.0 / static_cast<double>(require_support(mask, "rigid motion loss"));
  const double pixel_count = static_cast<double>(moved.size());

  RigidMotionLoss out{0.0, Tensor3(moved.rows(), moved.cols()), Tensor2(moved.rows(), moved.cols()),
                      Tensor2(moved.rows(), moved.cols())};
  for (std::size_t i = 0; i < moved.size(); ++i) {
    if (!mask[i]) continue;
    const double w = is_dynamic ? weights[i] * pixel_count : 1.0;
    const Eigen::Vector3d r = moved[i] - rigid_points_gt[i];
    const double c = confidence[i];
    const double dist = r.norm();
    out.value += w * c * dist - alpha * std::log(c);
    out.grad_moved[i] = inv_n * w * c * unit_or_zero(r);
    out.grad_confidence[i] = inv_n * (w * dist - alpha / c);
  }
  out.value *= inv_n;
  return out;
}

namespace {

bool has_support(const Mask& mask) { return !mask.empty() && count(mask) > 0; }

void accumulate(Tensor3& into, double scale, const Tensor3& term) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += scale * term[i];
}

void accumulate(Tensor2& into, double scale, const Tensor2& term) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += scale * term[i];
}

}  // namespace

LossReport total_loss(const LossInputs& in, const LossConfig& cfg) {
  const int rows = in.points.rows();
  const int cols = in.points.cols();
  LossReport report;
  report.grad_points = Tensor3(rows, cols);
  report.grad_moved = Tensor3(rows, cols);
  report.grad_weights = Tensor2(rows, cols);
  report.grad_confidence = Tensor2(rows, cols);

  if (has_support(in.mask_points)) {
    const ConfidenceLoss t = loss_point(in.points, in.points_gt, in.confidence, in.mask_points, cfg.alpha);
    report.point = t.value;
    report.point_active = true;
    accumulate(report.grad_points, cfg.lambda_point, t.grad_points);
    accumulate(report.grad_confidence, cfg.lambda_point, t.grad_confidence);
  }
  if (has_support(in.mask_motion)) {
    const ConfidenceLoss t = loss_motion3d(in.moved, in.moved_gt, in.confidence, in.mask_motion, cfg.alpha);
    report.motion3d = t.value;
    report.motion3d_active = true;
    accumulate(report.grad_moved, cfg.lambda_motion3d, t.grad_points);
    accumulate(report.grad_confidence, cfg.lambda_motion3d, t.grad_confidence);
  }
  if (has_support(in.mask_pixels)) {
    const ProjectionLoss t = loss_motion2d(in.moved, in.camera, in.moved_pixels_gt, in.mask_pixels);
    report.motion2d = t.value;
    report.motion2d_active = true;
    accumulate(report.grad_moved, cfg.lambda_motion2d, t.grad_moved);
  }
  if (has_support(in.mask_points)) {
    const PoseWeightLoss t =
        loss_pose_weight(in.points, in.moved, in.weights, in.points_gt, in.pose_gt, in.mask_points,
                         in.solve_mask, cfg.pose_mode, cfg.weight_gradient, cfg.fd_step);
    report.pose_weight = t.value;
    report.pose_weight_active = true;
    accumulate(report.grad_weights, cfg.lambda_pose_weight, t.grad_weights);

    const RigidMotionLoss rigid = loss_rigid_motion(in.moved, apply(in.pose_gt, in.points_gt),
                                                    in.confidence, in.weights, in.mask_points,
                                                    cfg.is_dynamic, cfg.alpha);
    report.rigid_motion = rigid.value;
    report.rigid_motion_active = true;
    accumulate(report.grad_moved, cfg.lambda_rigid, rigid.grad_moved);
    accumulate(report.grad_confidence, cfg.lambda_rigid, rigid.grad_confidence);
  }
  report.total = cfg.lambda_point * report.point + cfg.lambda_motion3d * report.motion3d +
                 cfg.lambda_motion2d * report.motion2d + cfg.lambda_pose_weight * report.pose_weight +
                 cfg.lambda_rigid * report.rigid_motion;
  return report;
}

std::vector<GradientCheckRow> check_gradients(const LossInputs& inputs, const LossConfig& config, double step,
                                              std::size_t samples, std::uint64_t seed) {
  if (!(step > 0.0)) throw Error(ErrorCode::ConfigInvalid, "finite difference step must be positive");
  const LossReport base = total_loss(inputs, config);
  LossConfig probe_config = config;
  probe_config.weight_gradient = WeightGradientMode::None;
  std::mt19937_64 rng(seed);

  auto pick = [&](std::size_t total) {
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (samples > 0 && samples < total) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(samples);
      std::sort(idx.begin(), idx.end());
    }
    return idx;
  };
  // Total with the named stop-gradient term frozen at its base value.
  auto held_pose_weight = [&](const LossInputs& probe) {
    const LossReport r = total_loss(probe, probe_config);
    return r.total - config.lambda_pose_weight * (r.pose_weight - base.pose_weight);
  };
  auto held_rigid_weighting = [&](const LossInputs& probe) {
    double v = total_loss(probe, probe_config).total;
    if (base.rigid_motion_active && config.is_dynamic) {
      const double moved_w = loss_rigid_motion(probe.moved, apply(probe.pose_gt, probe.points_gt), probe.confidence,
                                               probe.weights, probe.mask_points, true, config.alpha).value;
      v += config.lambda_rigid * (base.rigid_motion - moved_w);
    }
    return v;
  };
  auto plain = [&](const LossInputs& probe) { return total_loss(probe, probe_config).total; };

  std::vector<GradientCheckRow> rows;
  auto check_vec = [&](const char* name, Tensor3 LossInputs::*field, const Tensor3& analytic) {
    GradientCheckRow row{name};
    LossInputs probe = inputs;
    for (std::size_t e : pick(analytic.size() * 3)) {
      const std::size_t i = e / 3;
      const int k = static_cast<int>(e % 3);
      const double x = (inputs.*field)[i](k);
      (probe.*field)[i](k) = x + step;
      const double up = held_pose_weight(probe);
      (probe.*field)[i](k) = x - step;
      const double down = held_pose_weight(probe);
      (probe.*field)[i](k) = x;
      const double fd = (up - down) / (2.0 * step);
      row.max_abs_error = std::max(row.max_abs_error, std::abs(fd - analytic[i](k)));
      row.max_reference = std::max(row.max_reference, std::abs(fd));
      ++row.entries;
    }
    rows.push_back(row);
  };
  auto check_scalar = [&](const char* name, Tensor2 LossInputs::*field, const Tensor2& analytic, auto value) {
    GradientCheckRow row{name};
    LossInputs probe = inputs;
    for (std::size_t i : pick(analytic.size())) {
      const double x = (inputs.*field)[i];
      (probe.*field)[i] = x + step;
      const double up = value(probe);
      (probe.*field)[i] = x - step;
      const double down = value(probe);
      (probe.*field)[i] = x;
      const double fd = (up - down) / (2.0 * step);
      row.max_abs_error = std::max(row.max_abs_error, std::abs(fd - analytic[i]));
      row.max_reference = std::max(row.max_reference, std::abs(fd));
      ++row.entries;
    }
    rows.push_back(row);
  };
  check_vec("P", &LossInputs::points, base.grad_points);
  check_vec("Pvt", &LossInputs::moved, base.grad_moved);
  check_scalar("W", &LossInputs::weights, base.grad_weights, held_rigid_weighting);
  check_scalar("C", &LossInputs::confidence, base.grad_confidence, plain);
  return rows;
}

}  // namespace flowgeom
