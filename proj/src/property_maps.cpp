#include "flowgeom/property_maps.hpp"

#include <cmath>
#include <utility>

namespace flowgeom {

namespace {

std::string pixel_name(std::size_t i, int cols) {
  return "pixel (" + std::to_string(i / static_cast<std::size_t>(cols)) + ", " +
         std::to_string(i % static_cast<std::size_t>(cols)) + ")";
}

}  // namespace

Tensor3 PropertyMaps::flow() const {
  Tensor3 f(rows(), cols());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = moved_[i] - points_[i];
  return f;
}

PropertyMaps PropertyMaps::scaled(double k) const {
  PropertyMaps out = *this;
  for (std::size_t i = 0; i < out.points_.size(); ++i) {
    out.points_[i] *= k;
    out.moved_[i] *= k;
  }
  return out;
}

PropertyMaps validate_property_maps(PropertyMapsCandidate raw) {
  if (raw.points.empty()) throw Error(ErrorCode::ShapeMismatch, "point map is empty");
  require_same_shape(raw.points, raw.motion, "motion map");
  require_same_shape(raw.points, raw.weights, "pose weight map");
  require_same_shape(raw.points, raw.confidence, "confidence map");
  if (raw.valid.empty()) {
    raw.valid = Mask(raw.points.rows(), raw.points.cols(), 1);
  } else {
    require_same_shape(raw.points, raw.valid, "validity mask");
  }

  const int cols = raw.points.cols();
  const double tol = PropertyMaps::kWeightSumTolerance;
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < raw.points.size(); ++i) {
    if (raw.valid[i] == 0) {
      raw.weights[i] = 0.0;
      continue;
    }
    if (!raw.points[i].allFinite() || !raw.motion[i].allFinite() || !std::isfinite(raw.weights[i]) ||
        !std::isfinite(raw.confidence[i])) {
      throw Error(ErrorCode::NonFiniteValue, "non-finite value at valid " + pixel_name(i, cols));
    }
    double& w = raw.weights[i];
    if (w < -tol || w > 1.0 + tol) {
      throw Error(ErrorCode::WeightOutOfRange,
                  "W = " + std::to_string(w) + " at " + pixel_name(i, cols));
    }
    if (w < 0.0) w = 0.0;
    if (!(raw.confidence[i] > 1.0)) {
      throw Error(ErrorCode::ConfidenceOutOfRange,
                  "C = " + std::to_string(raw.confidence[i]) + " at " + pixel_name(i, cols));
    }
    weight_sum += w;
  }
  if (std::abs(weight_sum - 1.0) > tol) {
    throw Error(ErrorCode::WeightOutOfRange,
                "pose weights sum to " + std::to_string(weight_sum) + " over valid pixels");
  }

  PropertyMaps maps;
  if (raw.kind == MotionKind::SceneFlow) {
    maps.moved_ = Tensor3(raw.points.rows(), cols);
    for (std::size_t i = 0; i < raw.points.size(); ++i) maps.moved_[i] = raw.points[i] + raw.motion[i];
  } else {
    maps.moved_ = std::move(raw.motion);
  }
  for (auto& w : raw.weights.values()) w /= weight_sum;
  maps.points_ = std::move(raw.points);
  maps.weights_ = std::move(raw.weights);
  maps.confidence_ = std::move(raw.confidence);
  maps.valid_ = std::move(raw.valid);
  return maps;
}

PropertyMaps make_property_maps(Tensor3 points, Tensor3 motion, MotionKind kind, Tensor2 weights,
                                Tensor2 confidence, Mask valid) {
  return validate_property_maps(PropertyMapsCandidate{std::move(points), std::move(motion), kind,
                                                      std::move(weights), std::move(confidence),
                                                      std::move(valid)});
}

}  // namespace flowgeom
