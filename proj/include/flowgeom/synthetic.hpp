#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "flowgeom/camera.hpp"
#include "flowgeom/geometry.hpp"
#include "flowgeom/property_maps.hpp"
#include "flowgeom/transform.hpp"

namespace flowgeom {

struct SceneConfig {
  int rows = 64;
  int cols = 64;
  double focal = 350.0;                     // pixels
  std::array<double, 2> depth_range{2.0, 6.0};  // meters
  double dynamic_fraction = 0.3;
  double dynamic_displacement_max = 1.0;    // meters
  double camera_rotation_max = 0.2;         // radians
  double camera_translation_max = 0.5;      // meters
  int n_frames = 2;
  std::uint64_t seed = 0;
  PixelConvention convention = PixelConvention::Center;
};

// Errors: ConfigInvalid.
void validate(const SceneConfig& config);

// Ground truth for the anchored pair (I₀, Iₙ).
//
// Pixels of I₀ back-project to P. A dynamic pixel's world point moves by D
// (anchor coordinates) between frame 0 and frame n, so
//   Pvt = T̄ₙ·(P + D),   F_v = T̄ₙ·P − P,   F_t = R̄ₙ·D,   P_t = P + D.
struct PairGroundTruth {
  int frame = 0;
  RigidTransform pose;       // T̄ₙ: anchor camera coordinates -> frame-n camera coordinates
  Tensor3 points;            // P
  Tensor3 moved;             // Pvt
  Tensor3 flow;              // F = Pvt − P
  Tensor3 displacement;      // D, anchor coordinates (zero on static pixels)
  Tensor3 object_flow;       // R̄ₙ·D, the non-rigid part of F
  Tensor3 tracks;            // P + D
  PixelMap moved_pixels;     // π(Pvt)
  Mask moved_pixels_valid;
  Tensor2 oracle_weights;    // uniform over static pixels, 0 on dynamic, Σ = 1
  Mask valid;

  // Ground-truth property set with oracle weights and constant confidence.
  PropertyMaps maps(double confidence = 2.0) const;
};

struct SyntheticScene {
  SceneConfig config;
  Camera camera;
  PixelGrid grid;
  std::vector<Tensor2> depth;           // per frame: Z of the tracked samples in that frame's camera
  std::vector<RigidTransform> poses;    // anchor -> frame n; poses[0] is the identity
  std::vector<RigidTransform> relative; // frame n-1 -> frame n; relative[0] is the identity
  Mask dynamic_mask;
  std::vector<Tensor3> displacement;    // per frame, anchor coordinates; displacement[0] = 0
  Tensor3 anchor_points;
  std::vector<PairGroundTruth> pairs;   // pairs[k] is (I₀, I_{k+1})
};

// Deterministic in config.seed. Depth is a tilted base plane plus 3-8 seeded
// Gaussian bumps clamped to depth_range; the dynamic region is made of
// seeded blobs covering round(dynamic_fraction·H·W) pixels, each blob moving
// linearly in time.
SyntheticScene generate(const SceneConfig& config);

struct NoiseConfig {
  double point_sigma = 0.0;  // meters, added to P
  double flow_sigma = 0.0;   // meters, added to F
  std::uint64_t seed = 0;
};

// Adds seeded Gaussian noise to P and F of valid pixels; weights,
// confidence and validity are kept.
PropertyMaps perturb(const PropertyMaps& maps, const NoiseConfig& noise);

}  // namespace flowgeom
