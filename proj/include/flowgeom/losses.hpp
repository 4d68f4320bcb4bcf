#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowgeom/camera.hpp"
#include "flowgeom/grid.hpp"
#include "flowgeom/pose.hpp"
#include "flowgeom/transform.hpp"

// Training objectives on a predicted property set {P, Pvt, W, C}.
//
// Every term returns its value together with the gradient with respect to
// each input that receives one. Inputs are expected to be already normalized
// (see normalize_points). Residual norms are non-smooth at zero; their
// subgradient there is taken as 0.
namespace flowgeom {

enum class WeightGradientMode {
  Analytic,          // differentiate the closed-form weighted Procrustes solve
  FiniteDifference,  // central differences over each weight (reference)
  None,              // value only; grad_weights of the pose weight term stays zero
};

struct LossConfig {
  double lambda_point = 1.0;        // L_P
  double lambda_motion3d = 0.5;     // L_F
  double lambda_motion2d = 0.3;     // L_f
  double lambda_pose_weight = 0.5;  // L_W
  double lambda_rigid = 0.5;        // L_Fv
  double alpha = 0.2;
  bool is_dynamic = false;
  PoseMode pose_mode = PoseMode::ClosedForm;
  WeightGradientMode weight_gradient = WeightGradientMode::Analytic;
  double fd_step = 1e-5;
};

// Confidence-weighted regression term, shared by L_P and L_F:
//   (1/|M|) Σ M (C‖X − X̄‖ − α log C).
struct ConfidenceLoss {
  double value = 0.0;
  Tensor3 grad_points;      // ∂/∂X
  Tensor2 grad_confidence;  // ∂/∂C
};

// Errors: EmptyMask, ShapeMismatch.
ConfidenceLoss loss_point(const Tensor3& points, const Tensor3& points_gt, const Tensor2& confidence,
                          const Mask& mask, double alpha);
ConfidenceLoss loss_motion3d(const Tensor3& moved, const Tensor3& moved_gt, const Tensor2& confidence,
                             const Mask& mask, double alpha);

struct ProjectionLoss {
  double value = 0.0;
  Tensor3 grad_moved;
};

// (1/|M|) Σ M ‖π(Pvt) − p̄vt‖, no confidence weighting.
// Errors: EmptyMask, InvalidProjection (masked pixel with Z ≤ kMinDepth).
ProjectionLoss loss_motion2d(const Tensor3& moved, const Camera& camera, const PixelMap& moved_pixels_gt,
                             const Mask& mask);

struct PoseWeightLoss {
  double value = 0.0;
  Tensor2 grad_weights;
  Tensor3 grad_points;  // always zero: P is under stop-gradient
  Tensor3 grad_moved;   // always zero: Pvt is under stop-gradient
  RigidTransform pose;  // T̂ solved from (P, Pvt, W)
};

// (1/|M|) Σ M ‖T̂·P − T̄·P̄‖ with T̂ solved from (P, Pvt, W) over solve_mask.
// Only W receives gradient.
PoseWeightLoss loss_pose_weight(const Tensor3& points, const Tensor3& moved, const Tensor2& weights,
                                const Tensor3& points_gt, const RigidTransform& pose_gt, const Mask& mask,
                                const Mask& solve_mask = {}, PoseMode mode = PoseMode::ClosedForm,
                                WeightGradientMode gradient = WeightGradientMode::Analytic,
                                double fd_step = 1e-5);

struct RigidMotionLoss {
  double value = 0.0;
  Tensor3 grad_moved;
  Tensor2 grad_confidence;
  Tensor2 grad_weights;  // always zero: W enters through stop-gradient
};

// (1/|M|) Σ M (w C‖Pvt − P̄_v‖ − α log C), with w = sg(W)·H·W on dynamic
// pairs and w = 1 on static ones. P̄_v = T̄·P̄.
RigidMotionLoss loss_rigid_motion(const Tensor3& moved, const Tensor3& rigid_points_gt,
                                  const Tensor2& confidence, const Tensor2& weights, const Mask& mask,
                                  bool is_dynamic, double alpha);

struct LossInputs {
  // Prediction.
  Tensor3 points;
  Tensor3 moved;
  Tensor2 weights;
  Tensor2 confidence;
  Mask solve_mask;  // pixels entering the pose solve; empty = all

  // Supervision. Masks may be empty tensors or all-zero: the term is skipped.
  Tensor3 points_gt;
  Tensor3 moved_gt;
  PixelMap moved_pixels_gt;
  RigidTransform pose_gt;
  Camera camera;
  Mask mask_points;  // M_P
  Mask mask_motion;  // M_F
  Mask mask_pixels;  // M_f
};

struct LossReport {
  double point = 0.0;
  double motion3d = 0.0;
  double motion2d = 0.0;
  double pose_weight = 0.0;
  double rigid_motion = 0.0;
  double total = 0.0;
  bool point_active = false;
  bool motion3d_active = false;
  bool motion2d_active = false;
  bool pose_weight_active = false;
  bool rigid_motion_active = false;

  Tensor3 grad_points;
  Tensor3 grad_moved;
  Tensor2 grad_weights;
  Tensor2 grad_confidence;
};

LossReport total_loss(const LossInputs& inputs, const LossConfig& config = {});

// Central-difference check of the total_loss gradients. Stop-gradients are
// honoured: the pose weight term is held fixed while P or Pvt is probed, and
// the rigid motion term's weighting while W is probed.
struct GradientCheckRow {
  std::string tensor;
  std::size_t entries = 0;
  double max_abs_error = 0.0;
  double max_reference = 0.0;  // largest |finite difference|
  double relative_error() const { return max_reference > 0.0 ? max_abs_error / max_reference : max_abs_error; }
};

// samples: entries probed per tensor, drawn with the given seed (0 = all).
std::vector<GradientCheckRow> check_gradients(const LossInputs& inputs, const LossConfig& config, double step,
                                              std::size_t samples, std::uint64_t seed);

}  // namespace flowgeom
