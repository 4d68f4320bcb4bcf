#pragma once

#include <optional>
#include <span>
#include <vector>

#include "flowgeom/camera.hpp"
#include "flowgeom/grid.hpp"
#include "flowgeom/transform.hpp"

namespace flowgeom {

// Points with Z at or below this depth (meters) do not project.
inline constexpr double kMinDepth = 1e-6;

enum class PixelConvention {
  Center,  // u = col + 0.5, v = row + 0.5
  Corner,  // u = col, v = row
};

struct PixelGrid {
  PixelMap coords;
  PixelConvention convention = PixelConvention::Center;

  static PixelGrid make(int rows, int cols, PixelConvention convention = PixelConvention::Center);
  int rows() const noexcept { return coords.rows(); }
  int cols() const noexcept { return coords.cols(); }
};

struct ProjectedMap {
  PixelMap pixels;
  Mask valid;
};

std::optional<Eigen::Vector2d> project_point(const Eigen::Vector3d& point, const Camera& camera);
ProjectedMap project(const Tensor3& points, const Camera& camera);

struct BackprojectedMap {
  Tensor3 points;  // zero where invalid
  Mask valid;
};

// Depth that is non-finite or not above kMinDepth marks the pixel invalid.
BackprojectedMap backproject(const Tensor2& depth, const Camera& camera, const PixelGrid& grid);

enum class FocalMode { ClosedForm, Weiszfeld };

// Least-squares focal length given the point map and the principal point.
// Errors: DegenerateGeometry (fewer than 2 usable pixels, or all points on
// the optical axis).
double solve_focal(const Tensor3& points, const PixelGrid& grid, const Eigen::Vector2d& center,
                   FocalMode mode = FocalMode::ClosedForm, const Mask& valid = {});

struct NormalizedPoints {
  std::vector<Tensor3> maps;
  double scale = 1.0;  // mean valid-pixel norm of the inputs
};

// Divides every map by the mean Euclidean norm taken jointly over the valid
// pixels of all maps. masks may be empty (all valid) or one per map.
// Errors: AllZeroPoints, ShapeMismatch.
NormalizedPoints normalize_points(std::span<const Tensor3> maps, std::span<const Mask> masks = {});

// T·P − P: the flow a static scene shows under camera motion T.
Tensor3 rigid_flow(const Tensor3& points, const RigidTransform& transform);

}  // namespace flowgeom
