#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "flowgeom/error.hpp"
#include "flowgeom/losses.hpp"
#include "flowgeom/synthetic.hpp"
#include "helpers.hpp"

namespace flowgeom {
namespace {

TEST(Losses, DefaultWeights) {
  const LossConfig cfg;
  EXPECT_EQ(cfg.lambda_point, 1.0);
  EXPECT_EQ(cfg.lambda_motion3d, 0.5);
  EXPECT_EQ(cfg.lambda_motion2d, 0.3);
  EXPECT_EQ(cfg.lambda_pose_weight, 0.5);
  EXPECT_EQ(cfg.lambda_rigid, 0.5);
  EXPECT_EQ(cfg.alpha, 0.2);
}

TEST(Losses, ConfidenceTermByHand) {
  const Tensor3 x(1, 1, Eigen::Vector3d(2, 0, 0));
  const Tensor3 gt(1, 1, Eigen::Vector3d::Zero());
  const Tensor2 c(1, 1, 3.0);
  const ConfidenceLoss l = loss_point(x, gt, c, Mask(1, 1, 1), 0.2);
  EXPECT_NEAR(l.value, 6.0 - 0.2 * std::log(3.0), 1e-15);
  EXPECT_NEAR(l.value, 5.7803, 5e-5);
  EXPECT_NEAR(l.grad_confidence[0], 2.0 - 0.2 / 3.0, 1e-15);
  const double h = 1e-5;
  const double fd = (loss_point(x, gt, Tensor2(1, 1, 3.0 + h), Mask(1, 1, 1), 0.2).value -
                     loss_point(x, gt, Tensor2(1, 1, 3.0 - h), Mask(1, 1, 1), 0.2).value) / (2 * h);
  EXPECT_NEAR(fd / l.grad_confidence[0], 1.0, 1e-6);
  EXPECT_EQ(l.grad_points[0], Eigen::Vector3d(3, 0, 0));
}

TEST(Losses, PerfectPredictionTotal) {
  SceneConfig cfg;
  cfg.dynamic_fraction = 0.0;
  cfg.rows = cfg.cols = 16;
  const SyntheticScene scene = generate(cfg);
  const PairGroundTruth& gt = scene.pairs[0];
  LossInputs in;
  in.points = in.points_gt = gt.points;
  in.moved = in.moved_gt = gt.moved;
  in.weights = gt.oracle_weights;
  in.confidence = Tensor2(16, 16, std::numbers::e);
  in.moved_pixels_gt = gt.moved_pixels;
  in.pose_gt = gt.pose;
  in.camera = scene.camera;
  in.mask_points = in.mask_motion = in.mask_pixels = Mask(16, 16, 1);
  const LossReport r = total_loss(in);
  EXPECT_NEAR(r.point, -0.2, 1e-12);
  EXPECT_NEAR(r.motion3d, -0.2, 1e-12);
  EXPECT_NEAR(r.motion2d, 0.0, 1e-9);
  EXPECT_NEAR(r.pose_weight, 0.0, 1e-9);
  EXPECT_NEAR(r.rigid_motion, -0.2, 1e-9);
  EXPECT_NEAR(r.total, -0.4, 1e-9);
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (bool dynamic : {false, true}) {
      LossConfig cfg;
      cfg.is_dynamic = dynamic;
      for (const auto& row : check_gradients(test::random_loss_inputs(seed), cfg, 1e-5, 0, seed)) {
        EXPECT_LT(row.relative_error(), 1e-4) << row.tensor << " seed " << seed << " dynamic " << dynamic;
        EXPECT_GT(row.max_reference, 0.0) << row.tensor;
      }
    }
  }
}

TEST(Losses, ReferenceWeightGradientAgreesWithAnalytic) {
  const LossInputs in = test::random_loss_inputs(3);
  const PoseWeightLoss a = loss_pose_weight(in.points, in.moved, in.weights, in.points_gt, in.pose_gt,
                                            in.mask_points, {}, PoseMode::ClosedForm, WeightGradientMode::Analytic, 1e-5);
  const PoseWeightLoss f = loss_pose_weight(in.points, in.moved, in.weights, in.points_gt, in.pose_gt,
                                            in.mask_points, {}, PoseMode::ClosedForm,
                                            WeightGradientMode::FiniteDifference, 1e-5);
  double scale = 0.0;
  double err = 0.0;
  for (std::size_t i = 0; i < a.grad_weights.size(); ++i) {
    scale = std::max(scale, std::abs(f.grad_weights[i]));
    err = std::max(err, std::abs(a.grad_weights[i] - f.grad_weights[i]));
  }
  EXPECT_LT(err / scale, 1e-4);
  EXPECT_EQ(a.value, f.value);
}

TEST(Losses, StopGradientsAreExactlyZero) {
  const LossInputs in = test::random_loss_inputs(1);
  const PoseWeightLoss pw = loss_pose_weight(in.points, in.moved, in.weights, in.points_gt, in.pose_gt,
                                             in.mask_points, {}, PoseMode::ClosedForm, WeightGradientMode::Analytic, 1e-5);
  for (std::size_t i = 0; i < in.points.size(); ++i) {
    EXPECT_EQ(pw.grad_points[i], Eigen::Vector3d::Zero());
    EXPECT_EQ(pw.grad_moved[i], Eigen::Vector3d::Zero());
  }
  const RigidMotionLoss rm = loss_rigid_motion(in.moved, apply(in.pose_gt, in.points_gt), in.confidence,
                                               in.weights, in.mask_points, true, 0.2);
  for (double g : rm.grad_weights.values()) EXPECT_EQ(g, 0.0);
}

TEST(Losses, ProjectionJacobian) {
  const LossInputs in = test::random_loss_inputs(4);
  const ProjectionLoss l = loss_motion2d(in.moved, in.camera, in.moved_pixels_gt, in.mask_pixels);
  const double h = 1e-5;
  double err = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < in.moved.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      Tensor3 probe = in.moved;
      probe[i](k) += h;
      const double up = loss_motion2d(probe, in.camera, in.moved_pixels_gt, in.mask_pixels).value;
      probe[i](k) -= 2 * h;
      const double down = loss_motion2d(probe, in.camera, in.moved_pixels_gt, in.mask_pixels).value;
      const double fd = (up - down) / (2 * h);
      err = std::max(err, std::abs(fd - l.grad_moved[i](k)));
      scale = std::max(scale, std::abs(fd));
    }
  }
  EXPECT_LT(err / scale, 1e-4);
}

TEST(Losses, WeightMassOnMoversIsPenalized) {
  SceneConfig cfg;
  cfg.seed = 5;
  cfg.rows = cfg.cols = 32;
  const SyntheticScene scene = generate(cfg);
  const PairGroundTruth& gt = scene.pairs[0];
  const Mask all(32, 32, 1);
  auto value = [&](double dynamic_share) {
    const double n_dyn = static_cast<double>(count(scene.dynamic_mask));
    const double n_static = static_cast<double>(gt.points.size()) - n_dyn;
    Tensor2 w(32, 32);
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = scene.dynamic_mask[i] ? dynamic_share / n_dyn : (1.0 - dynamic_share) / n_static;
    }
    return loss_pose_weight(gt.points, gt.moved, w, gt.points, gt.pose, all, {}, PoseMode::ClosedForm,
                            WeightGradientMode::Analytic, 1e-5).value;
  };
  const double uniform_share = static_cast<double>(count(scene.dynamic_mask)) / gt.points.size();
  double previous = value(uniform_share);
  EXPECT_GT(previous, 0.0);
  for (double share = uniform_share - 0.05; share > 0.0; share -= 0.05) {
    const double v = value(share);
    EXPECT_LT(v, previous) << "share " << share;
    previous = v;
  }
  EXPECT_LT(value(0.0), 1e-9);
}

TEST(Losses, StaticPairsIgnoreWeightsInRigidTerm) {
  const LossInputs in = test::random_loss_inputs(2);
  Tensor2 other = in.weights;
  for (auto& w : other.values()) w *= 3.0;
  const Tensor3 target = apply(in.pose_gt, in.points_gt);
  const double a = loss_rigid_motion(in.moved, target, in.confidence, in.weights, in.mask_points, false, 0.2).value;
  const double b = loss_rigid_motion(in.moved, target, in.confidence, other, in.mask_points, false, 0.2).value;
  EXPECT_EQ(a, b);
  const double c = loss_rigid_motion(in.moved, target, in.confidence, other, in.mask_points, true, 0.2).value;
  EXPECT_NE(a, c);
}

TEST(Losses, MasksAndErrors) {
  LossInputs in = test::random_loss_inputs(0);
  try {
    loss_point(in.points, in.points_gt, in.confidence, Mask(8, 8, 0), 0.2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyMask);
  }
  in.moved(3, 3) = Eigen::Vector3d(0, 0, -1);
  try {
    loss_motion2d(in.moved, in.camera, in.moved_pixels_gt, in.mask_pixels);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidProjection);
  }
  // Absent supervision skips a term rather than failing.
  in.mask_pixels = Mask();
  in.mask_motion = Mask(8, 8, 0);
  const LossReport r = total_loss(in);
  EXPECT_FALSE(r.motion2d_active);
  EXPECT_FALSE(r.motion3d_active);
  EXPECT_TRUE(r.point_active);
  EXPECT_NEAR(r.total, r.point + 0.5 * r.pose_weight + 0.5 * r.rigid_motion, 1e-12);
}

}  // namespace
}  // namespace flowgeom
