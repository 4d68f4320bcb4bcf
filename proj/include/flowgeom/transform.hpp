#pragma once

#include <Eigen/Core>

#include "flowgeom/grid.hpp"

namespace flowgeom {

// Element of SE(3): x -> rotation * x + translation.
class RigidTransform {
 public:
  static constexpr double kOrthonormalTolerance = 1e-9;

  RigidTransform() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}

  // Throws InvalidTransform unless rotation is orthonormal with det +1
  // (within kOrthonormalTolerance) and every entry is finite.
  RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static RigidTransform identity() { return {}; }
  // Rodrigues rotation about `axis` (normalized internally) by `angle` radians.
  static RigidTransform from_axis_angle(const Eigen::Vector3d& axis, double angle,
                                        const Eigen::Vector3d& translation);

  const Eigen::Matrix3d& rotation() const noexcept { return rotation_; }
  const Eigen::Vector3d& translation() const noexcept { return translation_; }

  Eigen::Vector3d operator*(const Eigen::Vector3d& x) const { return rotation_ * x + translation_; }

  // Row-major 3x4 [R | t].
  Eigen::Matrix<double, 3, 4> matrix() const;

 private:
  struct Unchecked {};
  RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation, Unchecked)
      : rotation_(rotation), translation_(translation) {}

  friend RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
  friend RigidTransform invert(const RigidTransform& t);

  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

// (a ∘ b)(x) = a(b(x)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);
Tensor3 apply(const RigidTransform& t, const Tensor3& points);

double rotation_error(const RigidTransform& a, const RigidTransform& b);     // ‖Ra − Rb‖_F
double translation_error(const RigidTransform& a, const RigidTransform& b);  // ‖ta − tb‖₂

}  // namespace flowgeom
