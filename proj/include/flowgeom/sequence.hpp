#pragma once

#include <string>
#include <vector>

#include "flowgeom/pose.hpp"
#include "flowgeom/property_maps.hpp"

namespace flowgeom {

// Property sets of the anchored pairs (I₀, I₁), (I₀, I₂), ... computed for
// the anchor image I₀, so pairs[n].points() is the anchor point map seen by
// pair n.
struct SequencePrediction {
  std::vector<PropertyMaps> pairs;
};

enum class ScaleReference {
  FirstPair,   // factors s₁/sₙ
  MedianPair,  // factors median(s)/sₙ
};

enum class Paradigm { Anchored, SlidingWindow };

struct ScaleAlignment {
  SequencePrediction aligned;
  std::vector<double> factors;  // one per pair, multiplied into P and Pvt
  std::vector<double> anchor_norms;  // sₙ before alignment
};

// Errors: DegenerateAnchor (empty sequence, or an anchor map with zero mean
// norm over its valid pixels), ShapeMismatch.
ScaleAlignment align_scales(const SequencePrediction& sequence,
                            ScaleReference reference = ScaleReference::FirstPair);

// World-space (anchor camera) trajectories. Frame 0 is the anchor itself.
struct TrackSet {
  std::vector<Tensor3> points;          // per frame
  std::vector<Mask> valid;              // per frame
  std::vector<RigidTransform> poses;    // anchor -> frame n camera motion
  Mask dynamic_mask;                    // optional, empty when unknown

  std::size_t n_frames() const noexcept { return points.size(); }
  int rows() const noexcept { return points.empty() ? 0 : points.front().rows(); }
  int cols() const noexcept { return points.empty() ? 0 : points.front().cols(); }
};

struct PairStatus {
  bool ok = true;
  std::string message;  // error text when !ok
};

struct TrackResult {
  TrackSet tracks;
  std::vector<PairStatus> pairs;  // one per input pair
  std::size_t valid_pairs() const;
};

// Decomposes each pair and records P_t and T̂ for frame n = pair index + 1.
// A pair whose pose solve fails is flagged and its frame left invalid with
// an identity pose; the others proceed. SlidingWindow raises Unsupported.
TrackResult build_tracks(const SequencePrediction& aligned, PoseMode mode = PoseMode::ClosedForm,
                         Paradigm paradigm = Paradigm::Anchored);

}  // namespace flowgeom
