#pragma once

#include "flowgeom/grid.hpp"

namespace flowgeom {

enum class MotionKind {
  SceneFlow,    // motion map holds F
  MovedPoints,  // motion map holds Pvt = P + F
};

// Unvalidated input to validate_property_maps.
struct PropertyMapsCandidate {
  Tensor3 points;     // P, meters, camera space of the first image
  Tensor3 motion;     // F or Pvt depending on `kind`
  MotionKind kind = MotionKind::MovedPoints;
  Tensor2 weights;    // W
  Tensor2 confidence; // C
  Mask valid;         // empty = every pixel valid
};

// Validated per-pixel property set {P, Pvt, W, C} of one image with respect to
// its partner. Pvt is stored; F is derived as Pvt − P.
//
// Invariants: on valid pixels every entry is finite, W ∈ [0, 1] with ΣW = 1
// exactly (renormalized) and C > 1. Invalid pixels carry W = 0.
class PropertyMaps {
 public:
  static constexpr double kWeightSumTolerance = 1e-4;

  int rows() const noexcept { return points_.rows(); }
  int cols() const noexcept { return points_.cols(); }

  const Tensor3& points() const noexcept { return points_; }
  const Tensor3& moved() const noexcept { return moved_; }
  Tensor3 flow() const;
  const Tensor2& weights() const noexcept { return weights_; }
  const Tensor2& confidence() const noexcept { return confidence_; }
  const Mask& valid() const noexcept { return valid_; }

  // P and Pvt multiplied by k > 0; W, C and validity are unchanged.
  PropertyMaps scaled(double k) const;

 private:
  friend PropertyMaps validate_property_maps(PropertyMapsCandidate raw);
  PropertyMaps() = default;

  Tensor3 points_;
  Tensor3 moved_;
  Tensor2 weights_;
  Tensor2 confidence_;
  Mask valid_;
};

// Errors: ShapeMismatch, WeightOutOfRange, ConfidenceOutOfRange, NonFiniteValue.
PropertyMaps validate_property_maps(PropertyMapsCandidate raw);

PropertyMaps make_property_maps(Tensor3 points, Tensor3 motion, MotionKind kind, Tensor2 weights,
                                Tensor2 confidence, Mask valid = {});

}  // namespace flowgeom
