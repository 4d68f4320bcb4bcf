#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "flowgeom/geometry.hpp"
#include "flowgeom/grid.hpp"
#include "flowgeom/losses.hpp"
#include "flowgeom/transform.hpp"

namespace flowgeom::test {

inline Tensor3 random_points(int rows, int cols, std::mt19937_64& rng, double zmin = 1.0, double zmax = 5.0) {
  std::uniform_real_distribution<double> xy(-2.0, 2.0);
  std::uniform_real_distribution<double> z(zmin, zmax);
  Tensor3 p(rows, cols);
  for (auto& x : p.values()) x = Eigen::Vector3d(xy(rng), xy(rng), z(rng));
  return p;
}

inline RigidTransform random_transform(std::mt19937_64& rng, double max_angle = 3.0, double max_t = 2.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::Vector3d axis(n(rng), n(rng), n(rng));
  Eigen::Vector3d t(n(rng), n(rng), n(rng));
  return RigidTransform::from_axis_angle(axis, max_angle * u(rng), max_t * u(rng) * t.normalized());
}

inline double max_norm(const Tensor3& a) {
  double m = 0.0;
  for (const auto& x : a.values()) m = std::max(m, x.norm());
  return m;
}

inline double max_diff(const Tensor3& a, const Tensor3& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).norm());
  return m;
}

// Random 8x8 prediction/supervision pair, kept away from the residual kinks.
inline LossInputs random_loss_inputs(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LossInputs in;
  in.camera = Camera(40.0, Eigen::Vector2d(4, 4));
  in.points_gt = random_points(8, 8, rng, 2.0, 4.0);
  in.pose_gt = random_transform(rng, 0.3, 0.3);
  in.moved_gt = apply(in.pose_gt, in.points_gt);
  in.moved_pixels_gt = project(in.moved_gt, in.camera).pixels;
  in.points = in.points_gt;
  in.moved = in.moved_gt;
  for (auto& x : in.points.values()) x += Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
  for (auto& x : in.moved.values()) x += Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
  in.weights = Tensor2(8, 8);
  in.confidence = Tensor2(8, 8);
  for (auto& w : in.weights.values()) w = 0.2 + u(rng);
  for (auto& c : in.confidence.values()) c = 1.0 + 3.0 * u(rng);
  in.mask_points = Mask(8, 8, 1);
  in.mask_motion = Mask(8, 8, 1);
  in.mask_pixels = Mask(8, 8, 1);
  in.mask_motion(2, 5) = 0;
  in.mask_pixels(6, 1) = 0;
  return in;
}

// Fresh directory under the test working directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
  std::filesystem::path dir = std::filesystem::current_path() / ("scratch_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace flowgeom::test
