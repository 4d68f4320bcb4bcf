#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "flowgeom/camera.hpp"
#include "flowgeom/geometry.hpp"
#include "flowgeom/property_maps.hpp"
#include "flowgeom/transform.hpp"

namespace flowgeom {

enum class PoseMode {
  ClosedForm,  // minimizes Σ W‖Pvt − T·P‖² exactly
  Irls,        // reweighted solves approaching Σ W‖Pvt − T·P‖
};

std::string_view to_string(PoseMode mode);
PoseMode parse_pose_mode(std::string_view name);

// Weighted point correspondences src[k] -> dst[k] drawn from the pixels of a
// map pair; pixel[k] is the flat pixel index they came from.
struct Correspondences {
  std::vector<Eigen::Vector3d> src;
  std::vector<Eigen::Vector3d> dst;
  std::vector<double> weights;
  std::vector<std::size_t> pixel;
};

// Pixels that are valid and finite in both maps and in the weight map.
// Zero-weight pixels are kept so derivatives with respect to them exist; the
// weight sign is not checked here (validate_property_maps does that), which
// keeps the solve smooth for finite-difference probes around w = 0.
Correspondences gather_correspondences(const Tensor3& points, const Tensor3& moved,
                                       const Tensor2& weights, const Mask& valid);

struct ProcrustesFit {
  RigidTransform transform;
  Eigen::Vector3d src_mean;
  Eigen::Vector3d dst_mean;
  Eigen::Matrix3d cross_covariance;  // Σ w (p − μp)(q − μq)ᵀ, unnormalized
  Eigen::Matrix3d u;                 // cross_covariance = u · diag(singular) · vᵀ
  Eigen::Matrix3d v;
  Eigen::Vector3d singular_values;
  double reflection_sign = 1.0;      // det correction applied to the last axis
  double weight_sum = 0.0;
};

// Kabsch/Umeyama without scale, with weights.
// Errors: InsufficientSupport (< 3 positive weights or zero total weight),
// DegenerateConfiguration (σ₂ < 1e-12·σ₁ of the weighted cross-covariance).
ProcrustesFit fit_weighted_procrustes(const Correspondences& corr);

// dL/dw_k for every correspondence, given dL/dR and dL/dt at the fitted
// transform, by differentiating the closed-form solution.
std::vector<double> procrustes_weight_gradient(const ProcrustesFit& fit, const Correspondences& corr,
                                               const Eigen::Matrix3d& grad_rotation,
                                               const Eigen::Vector3d& grad_translation);

struct PoseSolution {
  RigidTransform transform;
  double residual = 0.0;  // Σ W‖Pvt − T·P‖ / Σ W over contributing pixels, meters
  int iterations = 0;     // reweighting iterations run (0 for closed form)
};

inline constexpr int kIrlsMaxIterations = 20;
inline constexpr double kIrlsRotationTolerance = 1e-10;
inline constexpr double kIrlsResidualFloor = 1e-8;

PoseSolution solve_pose_weighted(const Tensor3& points, const Tensor3& moved, const Tensor2& weights,
                                 const Mask& valid, PoseMode mode = PoseMode::ClosedForm);

// Rigid/non-rigid split of the scene flow of one property set.
// F_v + F_t = F, P_v = T̂·P and P_t = T̂⁻¹·(P + F) at every pixel.
struct FlowDecomposition {
  RigidTransform pose;  // T̂, camera motion mapping frame-I coordinates to frame-I′
  Tensor3 flow;         // F
  Tensor3 rigid_flow;   // F_v
  Tensor3 object_flow;  // F_t
  Tensor3 rigid_points; // P_v
  Tensor3 tracked;      // P_t
  double residual = 0.0;
  PoseMode mode = PoseMode::ClosedForm;
};

FlowDecomposition decompose_flow(const PropertyMaps& maps, PoseMode mode = PoseMode::ClosedForm);

// T̂⁻¹·(P + F).
Tensor3 track_points(const Tensor3& points, const Tensor3& flow, const RigidTransform& pose);

struct OpticalFlow {
  PixelMap flow;  // pixels, zero where invalid
  Mask valid;
};

OpticalFlow optical_flow_from_maps(const Tensor3& points, const Tensor3& moved, const Camera& camera);

}  // namespace flowgeom
