#include "flowgeom/pose.hpp"

#include <cmath>
#include <string>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace flowgeom {

std::string_view to_string(PoseMode mode) {
  return mode == PoseMode::ClosedForm ? "closed_form" : "irls";
}

PoseMode parse_pose_mode(std::string_view name) {
  if (name == "closed_form") return PoseMode::ClosedForm;
  if (name == "irls") return PoseMode::Irls;
  throw Error(ErrorCode::ConfigInvalid, "unknown pose mode '" + std::string(name) + "'");
}

Correspondences gather_correspondences(const Tensor3& points, const Tensor3& moved,
                                       const Tensor2& weights, const Mask& valid) {
  require_same_shape(points, moved, "moved point map");
  require_same_shape(points, weights, "pose weight map");
  if (!valid.empty()) require_same_shape(points, valid, "validity mask");
  Correspondences corr;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!mask_at(valid, i)) continue;
    const double w = weights[i];
    if (!std::isfinite(w) || !points[i].allFinite() || !moved[i].allFinite()) continue;
    corr.src.push_back(points[i]);
    corr.dst.push_back(moved[i]);
    corr.weights.push_back(w);
    corr.pixel.push_back(i);
  }
  return corr;
}

ProcrustesFit fit_weighted_procrustes(const Correspondences& corr) {
  std::size_t support = 0;
  double weight_sum = 0.0;
  for (double w : corr.weights) {
    support += w > 0.0;
    weight_sum += w;
  }
  if (support < 3 || !(weight_sum > 0.0)) {
    throw Error(ErrorCode::InsufficientSupport,
                std::to_string(support) + " pixels with positive weight, need at least 3");
  }

  ProcrustesFit fit;
  fit.weight_sum = weight_sum;
  Eigen::Vector3d src_acc = Eigen::Vector3d::Zero();
  Eigen::Vector3d dst_acc = Eigen::Vector3d::Zero();
  for (std::size_t k = 0; k < corr.src.size(); ++k) {
    src_acc += corr.weights[k] * corr.src[k];
    dst_acc += corr.weights[k] * corr.dst[k];
  }
  fit.src_mean = src_acc / weight_sum;
  fit.dst_mean = dst_acc / weight_sum;

  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t k = 0; k < corr.src.size(); ++k) {
    if (corr.weights[k] == 0.0) continue;
    h += corr.weights[k] * (corr.src[k] - fit.src_mean) * (corr.dst[k] - fit.dst_mean).transpose();
  }
  fit.cross_covariance = h;

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  fit.u = svd.matrixU();
  fit.v = svd.matrixV();
  fit.singular_values = svd.singularValues();
  const double s1 = fit.singular_values(0);
  const double s2 = fit.singular_values(1);
  if (!(s1 > 0.0) || s2 < 1e-12 * s1) {
    throw Error(ErrorCode::DegenerateConfiguration,
                "weighted point set is collinear (second singular value " + std::to_string(s2) +
                    " vs first " + std::to_string(s1) + ")");
  }

  // R = V·D·Uᵀ maximizes tr(R·H); D flips the weakest axis when needed so det(R) = +1.
  fit.reflection_sign = (fit.v * fit.u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Eigen::Vector3d d(1.0, 1.0, fit.reflection_sign);
  const Eigen::Matrix3d rotation = fit.v * d.asDiagonal() * fit.u.transpose();
  fit.transform = RigidTransform(rotation, fit.dst_mean - rotation * fit.src_mean);
  return fit;
}

std::vector<double> procrustes_weight_gradient(const ProcrustesFit& fit, const Correspondences& corr,
                                               const Eigen::Matrix3d& grad_rotation,
                                               const Eigen::Vector3d& grad_translation) {
  // With H = U Σ Vᵀ and R = V D Uᵀ, the product S = H·R = U (ΣD) Uᵀ stays
  // symmetric under perturbation. Writing dR = R·Ω with Ω skew gives
  //   S·Ω + Ω·S = Rᵀ·dHᵀ − dH·R,
  // solved entrywise in the eigenbasis U of S.
  const Eigen::Matrix3d& rot = fit.transform.rotation();
  const Eigen::Vector3d lambda(fit.singular_values(0), fit.singular_values(1),
                               fit.reflection_sign * fit.singular_values(2));
  const Eigen::Matrix3d ru = rot * fit.u;
  const double inv_sum = 1.0 / fit.weight_sum;
  // Chain rule through t = μq − R·μp.
  const Eigen::Matrix3d grad_r_total = grad_rotation - grad_translation * fit.src_mean.transpose();

  std::vector<double> grad(corr.src.size());
  for (std::size_t k = 0; k < corr.src.size(); ++k) {
    const Eigen::Vector3d a = corr.src[k] - fit.src_mean;
    const Eigen::Vector3d b = corr.dst[k] - fit.dst_mean;
    const Eigen::Matrix3d dh = a * b.transpose();
    const Eigen::Matrix3d rhs = fit.u.transpose() * (rot.transpose() * dh.transpose() - dh * rot) * fit.u;
    Eigen::Matrix3d omega = Eigen::Matrix3d::Zero();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        if (i == j) continue;
        const double denom = lambda(i) + lambda(j);
        if (std::abs(denom) > 0.0) omega(i, j) = rhs(i, j) / denom;
      }
    }
    const Eigen::Matrix3d d_rotation = ru * omega * fit.u.transpose();
    const Eigen::Vector3d d_translation_direct = (b - rot * a) * inv_sum;
    grad[k] = (grad_r_total.cwiseProduct(d_rotation)).sum() + grad_translation.dot(d_translation_direct);
  }
  return grad;
}

namespace {

double weighted_residual(const Correspondences& corr, const std::vector<double>& base_weights,
                         const RigidTransform& t) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < corr.src.size(); ++k) {
    num += base_weights[k] * (corr.dst[k] - t * corr.src[k]).norm();
    den += base_weights[k];
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace

PoseSolution solve_pose_weighted(const Tensor3& points, const Tensor3& moved, const Tensor2& weights,
                                 const Mask& valid, PoseMode mode) {
  Correspondences corr = gather_correspondences(points, moved, weights, valid);
  const std::vector<double> base = corr.weights;
  ProcrustesFit fit = fit_weighted_procrustes(corr);
  PoseSolution solution{fit.transform, 0.0, 0};

  if (mode == PoseMode::Irls) {
    for (int iter = 0; iter < kIrlsMaxIterations; ++iter) {
      for (std::size_t k = 0; k < corr.src.size(); ++k) {
        const double r = (corr.dst[k] - solution.transform * corr.src[k]).norm();
        corr.weights[k] = base[k] / std::max(r, kIrlsResidualFloor);
      }
      const RigidTransform next = fit_weighted_procrustes(corr).transform;
      const double change = rotation_error(next, solution.transform);
      solution.transform = next;
      solution.iterations = iter + 1;
      if (change < kIrlsRotationTolerance) break;
    }
  }
  solution.residual = weighted_residual(corr, base, solution.transform);
  return solution;
}

Tensor3 track_points(const Tensor3& points, const Tensor3& flow, const RigidTransform& pose) {
  require_same_shape(points, flow, "scene flow map");
  const RigidTransform inverse = invert(pose);
  Tensor3 out(points.rows(), points.cols());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = inverse * (points[i] + flow[i]);
  return out;
}

FlowDecomposition decompose_flow(const PropertyMaps& maps, PoseMode mode) {
  const PoseSolution solution =
      solve_pose_weighted(maps.points(), maps.moved(), maps.weights(), maps.valid(), mode);

  FlowDecomposition out;
  out.pose = solution.transform;
  out.residual = solution.residual;
  out.mode = mode;
  out.flow = maps.flow();
  out.rigid_points = apply(out.pose, maps.points());
  out.rigid_flow = Tensor3(maps.rows(), maps.cols());
  out.object_flow = Tensor3(maps.rows(), maps.cols());
  for (std::size_t i = 0; i < out.flow.size(); ++i) {
    out.rigid_flow[i] = out.rigid_points[i] - maps.points()[i];
    out.object_flow[i] = out.flow[i] - out.rigid_flow[i];
  }
  out.tracked = track_points(maps.points(), out.flow, out.pose);
  return out;
}

OpticalFlow optical_flow_from_maps(const Tensor3& points, const Tensor3& moved, const Camera& camera) {
  require_same_shape(points, moved, "moved point map");
  const ProjectedMap from = project(points, camera);
  const ProjectedMap to = project(moved, camera);
  OpticalFlow out{PixelMap(points.rows(), points.cols()), Mask(points.rows(), points.cols())};
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (from.valid[i] && to.valid[i]) {
      out.flow[i] = to.pixels[i] - from.pixels[i];
      out.valid[i] = 1;
    }
  }
  return out;
}

}  // namespace flowgeom
