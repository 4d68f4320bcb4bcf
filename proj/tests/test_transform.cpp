#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "flowgeom/error.hpp"
#include "flowgeom/transform.hpp"
#include "helpers.hpp"

namespace flowgeom {
namespace {

TEST(RigidTransform, QuarterTurnAboutZ) {
  const auto t = RigidTransform::from_axis_angle({0, 0, 2}, std::numbers::pi / 2, {1, 0, 0});
  const Eigen::Vector3d y = t * Eigen::Vector3d(1, 0, 0);
  EXPECT_NEAR((y - Eigen::Vector3d(1, 1, 0)).norm(), 0.0, 1e-15);
}

TEST(RigidTransform, RejectsNonRotations) {
  Eigen::Matrix3d reflect = Eigen::Matrix3d::Identity();
  reflect(2, 2) = -1.0;
  EXPECT_THROW(RigidTransform(reflect, Eigen::Vector3d::Zero()), Error);
  EXPECT_THROW(RigidTransform(2.0 * Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero()), Error);
  EXPECT_THROW(RigidTransform(Eigen::Matrix3d::Identity(), Eigen::Vector3d(NAN, 0, 0)), Error);
  try {
    RigidTransform(reflect, Eigen::Vector3d::Zero());
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidTransform);
  }
}

TEST(RigidTransform, InverseRoundTrip) {
  std::mt19937_64 rng(11);
  for (int s = 0; s < 100; ++s) {
    const RigidTransform t = test::random_transform(rng);
    const Tensor3 p = test::random_points(4, 5, rng);
    EXPECT_LT(test::max_diff(apply(invert(t), apply(t, p)), p), 1e-9);
  }
}

TEST(RigidTransform, ComposeAppliesRightFirst) {
  std::mt19937_64 rng(3);
  const RigidTransform a = test::random_transform(rng);
  const RigidTransform b = test::random_transform(rng);
  const Eigen::Vector3d x(0.3, -1.2, 2.5);
  EXPECT_LT(((compose(a, b) * x) - a * (b * x)).norm(), 1e-12);
  EXPECT_LT(rotation_error(compose(a, invert(a)), RigidTransform::identity()), 1e-12);
}

TEST(RigidTransform, MatrixLayout) {
  const auto t = RigidTransform::from_axis_angle({1, 0, 0}, 0.4, {1, 2, 3});
  const auto m = t.matrix();
  EXPECT_EQ((m.block<3, 3>(0, 0)), t.rotation());
  EXPECT_EQ(m.col(3), t.translation());
}

}  // namespace
}  // namespace flowgeom
