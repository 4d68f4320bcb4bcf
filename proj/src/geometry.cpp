#include "flowgeom/geometry.hpp"

#include <cmath>

namespace flowgeom {

PixelGrid PixelGrid::make(int rows, int cols, PixelConvention convention) {
  PixelGrid grid{PixelMap(rows, cols), convention};
  const double offset = convention == PixelConvention::Center ? 0.5 : 0.0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) grid.coords(r, c) = Eigen::Vector2d(c + offset, r + offset);
  }
  return grid;
}

std::optional<Eigen::Vector2d> project_point(const Eigen::Vector3d& point, const Camera& camera) {
  if (!point.allFinite() || !(point.z() > kMinDepth)) return std::nullopt;
  return Eigen::Vector2d(camera.focal * (point.x() / point.z()) + camera.center.x(),
                         camera.focal * (point.y() / point.z()) + camera.center.y());
}

ProjectedMap project(const Tensor3& points, const Camera& camera) {
  ProjectedMap out{PixelMap(points.rows(), points.cols()), Mask(points.rows(), points.cols())};
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (auto p = project_point(points[i], camera)) {
      out.pixels[i] = *p;
      out.valid[i] = 1;
    }
  }
  return out;
}

BackprojectedMap backproject(const Tensor2& depth, const Camera& camera, const PixelGrid& grid) {
  require_same_shape(depth, grid.coords, "pixel grid");
  BackprojectedMap out{Tensor3(depth.rows(), depth.cols()), Mask(depth.rows(), depth.cols())};
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double z = depth[i];
    if (!std::isfinite(z) || !(z > kMinDepth)) continue;
    const Eigen::Vector2d& uv = grid.coords[i];
    out.points[i] = Eigen::Vector3d(z * ((uv.x() - camera.center.x()) / camera.focal),
                                    z * ((uv.y() - camera.center.y()) / camera.focal), z);
    out.valid[i] = 1;
  }
  return out;
}

double solve_focal(const Tensor3& points, const PixelGrid& grid, const Eigen::Vector2d& center,
                   FocalMode mode, const Mask& valid) {
  require_same_shape(points, grid.coords, "pixel grid");
  if (!valid.empty()) require_same_shape(points, valid, "validity mask");

  std::vector<Eigen::Vector2d> rays;
  std::vector<Eigen::Vector2d> offsets;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Eigen::Vector3d& p = points[i];
    if (!mask_at(valid, i) || !p.allFinite() || !(p.z() > kMinDepth)) continue;
    rays.emplace_back(p.x() / p.z(), p.y() / p.z());
    offsets.push_back(grid.coords[i] - center);
  }
  if (rays.size() < 2) {
    throw Error(ErrorCode::DegenerateGeometry, "need at least 2 pixels in front of the camera");
  }

  // f minimizing Σ wᵢ‖uᵢ − f·rᵢ‖².
  auto weighted_fit = [&](const std::vector<double>* w) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < rays.size(); ++i) {
      const double wi = w ? (*w)[i] : 1.0;
      num += wi * offsets[i].dot(rays[i]);
      den += wi * rays[i].squaredNorm();
    }
    return std::pair{num, den};
  };

  auto [num, den] = weighted_fit(nullptr);
  if (den < 1e-12) {
    throw Error(ErrorCode::DegenerateGeometry, "all points lie on the optical axis");
  }
  double focal = num / den;

  if (mode == FocalMode::Weiszfeld) {
    std::vector<double> w(rays.size());
    for (int iter = 0; iter < 10; ++iter) {
      for (std::size_t i = 0; i < rays.size(); ++i) {
        w[i] = 1.0 / std::max((offsets[i] - focal * rays[i]).norm(), 1e-8);
      }
      auto [n, d] = weighted_fit(&w);
      if (d <= 0.0) break;
      focal = n / d;
    }
  }
  if (!(focal > 0.0)) {
    throw Error(ErrorCode::DegenerateGeometry, "non-positive focal length " + std::to_string(focal));
  }
  return focal;
}

NormalizedPoints normalize_points(std::span<const Tensor3> maps, std::span<const Mask> masks) {
  if (maps.empty()) throw Error(ErrorCode::AllZeroPoints, "no point maps given");
  if (!masks.empty() && masks.size() != maps.size()) {
    throw Error(ErrorCode::ShapeMismatch, "need one mask per point map");
  }
  double norm_sum = 0.0;
  std::size_t n = 0;
  for (std::size_t m = 0; m < maps.size(); ++m) {
    const Mask* mask = masks.empty() ? nullptr : &masks[m];
    if (mask && !mask->empty()) require_same_shape(maps[m], *mask, "normalization mask");
    for (std::size_t i = 0; i < maps[m].size(); ++i) {
      if (mask && !mask_at(*mask, i)) continue;
      norm_sum += maps[m][i].norm();
      ++n;
    }
  }
  if (n == 0 || !(norm_sum > 0.0) || !std::isfinite(norm_sum)) {
    throw Error(ErrorCode::AllZeroPoints, "mean point norm is zero or undefined");
  }
  NormalizedPoints out;
  out.scale = norm_sum / static_cast<double>(n);
  out.maps.reserve(maps.size());
  for (const auto& map : maps) {
    Tensor3 scaled = map;
    for (auto& p : scaled.values()) p /= out.scale;
    out.maps.push_back(std::move(scaled));
  }
  return out;
}

Tensor3 rigid_flow(const Tensor3& points, const RigidTransform& transform) {
  Tensor3 out(points.rows(), points.cols());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = transform * points[i] - points[i];
  return out;
}

}  // namespace flowgeom
