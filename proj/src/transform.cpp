#include "flowgeom/transform.hpp"

#include <cmath>

#include <Eigen/Geometry>

namespace flowgeom {

RigidTransform::RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw Error(ErrorCode::InvalidTransform, "non-finite entries");
  }
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).norm();
  if (ortho > kOrthonormalTolerance) {
    throw Error(ErrorCode::InvalidTransform,
                "rotation not orthonormal (|RᵀR − I| = " + std::to_string(ortho) + ")");
  }
  const double det = rotation.determinant();
  if (std::abs(det - 1.0) > kOrthonormalTolerance) {
    throw Error(ErrorCode::InvalidTransform, "det(R) = " + std::to_string(det));
  }
}

RigidTransform RigidTransform::from_axis_angle(const Eigen::Vector3d& axis, double angle,
                                               const Eigen::Vector3d& translation) {
  if (axis.norm() == 0.0) return RigidTransform(Eigen::Matrix3d::Identity(), translation);
  const Eigen::Matrix3d r = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  return RigidTransform(r, translation);
}

Eigen::Matrix<double, 3, 4> RigidTransform::matrix() const {
  Eigen::Matrix<double, 3, 4> m;
  m.leftCols<3>() = rotation_;
  m.col(3) = translation_;
  return m;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return RigidTransform(a.rotation_ * b.rotation_, a.rotation_ * b.translation_ + a.translation_,
                        RigidTransform::Unchecked{});
}

RigidTransform invert(const RigidTransform& t) {
  const Eigen::Matrix3d rt = t.rotation_.transpose();
  return RigidTransform(rt, -(rt * t.translation_), RigidTransform::Unchecked{});
}

Tensor3 apply(const RigidTransform& t, const Tensor3& points) {
  if (points.empty()) return {};
  Tensor3 out(points.rows(), points.cols());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = t * points[i];
  return out;
}

double rotation_error(const RigidTransform& a, const RigidTransform& b) {
  return (a.rotation() - b.rotation()).norm();
}

double translation_error(const RigidTransform& a, const RigidTransform& b) {
  return (a.translation() - b.translation()).norm();
}

}  // namespace flowgeom
