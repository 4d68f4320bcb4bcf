#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "flowgeom/error.hpp"

namespace flowgeom {

// Pinhole camera with one focal length for both axes.
struct Camera {
  double focal = 1.0;                                  // pixels
  Eigen::Vector2d center = Eigen::Vector2d::Zero();    // pixels

  Camera() = default;
  Camera(double f, const Eigen::Vector2d& c) : focal(f), center(c) { validate(); }

  void validate() const {
    if (!(std::isfinite(focal) && focal > 0.0)) {
      throw Error(ErrorCode::ConfigInvalid, "focal length must be positive, got " + std::to_string(focal));
    }
    if (!center.allFinite()) throw Error(ErrorCode::ConfigInvalid, "optical center not finite");
  }
};

}  // namespace flowgeom
