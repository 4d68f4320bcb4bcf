#include "flowgeom/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "flowgeom/parallel.hpp"

namespace flowgeom {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent stream per (seed, purpose, index).
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index = 0) {
  return std::mt19937_64(splitmix64(splitmix64(splitmix64(seed) ^ purpose) + index));
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    Eigen::Vector3d v(n(rng), n(rng), n(rng));
    const double len = v.norm();
    if (len > 1e-9) return v / len;
  }
}

enum Purpose : std::uint64_t { kDepth = 1, kBlobs = 2, kPose = 3, kNoise = 4 };

Tensor2 make_depth(const SceneConfig& cfg) {
  auto rng = stream(cfg.seed, kDepth);
  const double lo = cfg.depth_range[0];
  const double hi = cfg.depth_range[1];
  const double span = hi - lo;
  const double base = uniform(rng, lo + 0.3 * span, lo + 0.7 * span);
  const double tilt_x = uniform(rng, -0.2, 0.2) * span;
  const double tilt_y = uniform(rng, -0.2, 0.2) * span;

  struct Bump { double row, col, sigma, amplitude; };
  const int n_bumps = std::uniform_int_distribution<int>(3, 8)(rng);
  const double extent = std::min(cfg.rows, cfg.cols);
  std::vector<Bump> bumps;
  for (int b = 0; b < n_bumps; ++b) {
    bumps.push_back({uniform(rng, 0.0, cfg.rows), uniform(rng, 0.0, cfg.cols),
                     uniform(rng, 0.05, 0.25) * extent, uniform(rng, -0.25, 0.25) * span});
  }

  Tensor2 depth(cfg.rows, cfg.cols);
  for (int r = 0; r < cfg.rows; ++r) {
    for (int c = 0; c < cfg.cols; ++c) {
      double z = base + tilt_x * (c / static_cast<double>(cfg.cols) - 0.5) +
                 tilt_y * (r / static_cast<double>(cfg.rows) - 0.5);
      for (const auto& b : bumps) {
        const double d2 = (r - b.row) * (r - b.row) + (c - b.col) * (c - b.col);
        z += b.amplitude * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
      }
      depth(r, c) = std::clamp(z, lo, hi);
    }
  }
  return depth;
}

struct DynamicLayout {
  Mask mask;
  std::vector<int> blob_of_pixel;         // -1 for static pixels
  std::vector<Eigen::Vector3d> velocity;  // displacement at the last frame, per blob
};

DynamicLayout make_dynamic_layout(const SceneConfig& cfg) {
  const std::size_t n_pixels = static_cast<std::size_t>(cfg.rows) * cfg.cols;
  const auto n_dynamic =
      static_cast<std::size_t>(std::llround(cfg.dynamic_fraction * static_cast<double>(n_pixels)));
  DynamicLayout layout{Mask(cfg.rows, cfg.cols), std::vector<int>(n_pixels, -1), {}};
  if (n_dynamic == 0) return layout;

  auto rng = stream(cfg.seed, kBlobs);
  const int n_blobs = std::uniform_int_distribution<int>(1, 3)(rng);
  struct Blob { double row, col, sigma; };
  std::vector<Blob> blobs;
  const double extent = std::min(cfg.rows, cfg.cols);
  for (int b = 0; b < n_blobs; ++b) {
    blobs.push_back({uniform(rng, 0.2, 0.8) * cfg.rows, uniform(rng, 0.2, 0.8) * cfg.cols,
                     uniform(rng, 0.1, 0.3) * extent});
    const double magnitude = uniform(rng, 0.5, 1.0) * cfg.dynamic_displacement_max;
    layout.velocity.push_back(magnitude * random_unit(rng));
  }

  // Score every pixel by its strongest blob, then take the top n_dynamic.
  std::vector<double> score(n_pixels);
  std::vector<int> owner(n_pixels);
  for (int r = 0; r < cfg.rows; ++r) {
    for (int c = 0; c < cfg.cols; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * cfg.cols + c;
      score[i] = -1.0;
      for (int b = 0; b < n_blobs; ++b) {
        const double d2 = (r + 0.5 - blobs[b].row) * (r + 0.5 - blobs[b].row) +
                          (c + 0.5 - blobs[b].col) * (c + 0.5 - blobs[b].col);
        const double s = std::exp(-d2 / (2.0 * blobs[b].sigma * blobs[b].sigma));
        if (s > score[i]) {
          score[i] = s;
          owner[i] = b;
        }
      }
    }
  }
  std::vector<std::size_t> order(n_pixels);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  for (std::size_t k = 0; k < n_dynamic; ++k) {
    layout.mask[order[k]] = 1;
    layout.blob_of_pixel[order[k]] = owner[order[k]];
  }
  return layout;
}

RigidTransform random_pose(const SceneConfig& cfg, int frame) {
  auto rng = stream(cfg.seed, kPose, static_cast<std::uint64_t>(frame));
  const Eigen::Vector3d axis = random_unit(rng);
  const double angle = uniform(rng, 0.0, 1.0) * cfg.camera_rotation_max;
  const Eigen::Vector3d direction = random_unit(rng);
  const double distance = uniform(rng, 0.0, 1.0) * cfg.camera_translation_max;
  return RigidTransform::from_axis_angle(axis, angle, distance * direction);
}

}  // namespace

void validate(const SceneConfig& cfg) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); };
  if (cfg.rows <= 0 || cfg.cols <= 0) fail("image size must be positive");
  if (!(std::isfinite(cfg.focal) && cfg.focal > 0.0)) fail("focal length must be positive");
  if (!(cfg.depth_range[0] > kMinDepth && cfg.depth_range[1] > cfg.depth_range[0]) ||
      !std::isfinite(cfg.depth_range[1])) {
    fail("depth range must be a nonempty positive interval");
  }
  if (!(cfg.dynamic_fraction >= 0.0 && cfg.dynamic_fraction <= 1.0)) {
    fail("dynamic fraction must lie in [0, 1]");
  }
  if (!(cfg.dynamic_displacement_max >= 0.0) || !std::isfinite(cfg.dynamic_displacement_max)) {
    fail("dynamic displacement bound must be non-negative");
  }
  if (!(cfg.camera_rotation_max >= 0.0) || !std::isfinite(cfg.camera_rotation_max)) {
    fail("camera rotation bound must be non-negative");
  }
  if (!(cfg.camera_translation_max >= 0.0) || !std::isfinite(cfg.camera_translation_max)) {
    fail("camera translation bound must be non-negative");
  }
  if (cfg.n_frames < 2) fail("need at least 2 frames");
  const double n_pixels = static_cast<double>(cfg.rows) * cfg.cols;
  if (n_pixels - std::llround(cfg.dynamic_fraction * n_pixels) < 3) {
    fail("fewer than 3 static pixels left for the oracle pose weights");
  }
}

PropertyMaps PairGroundTruth::maps(double confidence) const {
  return make_property_maps(points, moved, MotionKind::MovedPoints, oracle_weights,
                            Tensor2(points.rows(), points.cols(), confidence), valid);
}

SyntheticScene generate(const SceneConfig& cfg) {
  validate(cfg);
  SyntheticScene scene;
  scene.config = cfg;
  scene.camera = Camera(cfg.focal, Eigen::Vector2d(cfg.cols / 2.0, cfg.rows / 2.0));
  scene.grid = PixelGrid::make(cfg.rows, cfg.cols, cfg.convention);

  const Tensor2 anchor_depth = make_depth(cfg);
  BackprojectedMap anchor = backproject(anchor_depth, scene.camera, scene.grid);
  scene.anchor_points = anchor.points;

  const DynamicLayout layout = make_dynamic_layout(cfg);
  scene.dynamic_mask = layout.mask;

  const auto n_frames = static_cast<std::size_t>(cfg.n_frames);
  scene.poses.assign(n_frames, RigidTransform::identity());
  scene.displacement.assign(n_frames, Tensor3(cfg.rows, cfg.cols));
  for (std::size_t n = 1; n < n_frames; ++n) {
    scene.poses[n] = random_pose(cfg, static_cast<int>(n));
    const double progress = static_cast<double>(n) / static_cast<double>(n_frames - 1);
    for (std::size_t i = 0; i < layout.blob_of_pixel.size(); ++i) {
      const int b = layout.blob_of_pixel[i];
      if (b >= 0) scene.displacement[n][i] = progress * layout.velocity[static_cast<std::size_t>(b)];
    }
  }
  scene.relative.assign(n_frames, RigidTransform::identity());
  for (std::size_t n = 1; n < n_frames; ++n) {
    scene.relative[n] = compose(scene.poses[n], invert(scene.poses[n - 1]));
  }

  Tensor2 oracle(cfg.rows, cfg.cols);
  std::size_t n_static = 0;
  for (std::size_t i = 0; i < oracle.size(); ++i) n_static += layout.mask[i] == 0 && anchor.valid[i];
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    if (layout.mask[i] == 0 && anchor.valid[i]) oracle[i] = 1.0 / static_cast<double>(n_static);
  }

  scene.depth.assign(n_frames, Tensor2());
  scene.depth[0] = anchor_depth;
  scene.pairs.resize(n_frames - 1);
  parallel_for(n_frames - 1, [&](std::size_t k) {
    const std::size_t n = k + 1;
    const RigidTransform& pose = scene.poses[n];
    PairGroundTruth& gt = scene.pairs[k];
    gt.frame = static_cast<int>(n);
    gt.pose = pose;
    gt.points = scene.anchor_points;
    gt.displacement = scene.displacement[n];
    gt.valid = anchor.valid;
    gt.oracle_weights = oracle;
    gt.moved = Tensor3(cfg.rows, cfg.cols);
    gt.flow = Tensor3(cfg.rows, cfg.cols);
    gt.object_flow = Tensor3(cfg.rows, cfg.cols);
    gt.tracks = Tensor3(cfg.rows, cfg.cols);
    for (std::size_t i = 0; i < gt.points.size(); ++i) {
      gt.tracks[i] = gt.points[i] + gt.displacement[i];
      gt.moved[i] = pose * gt.tracks[i];
      gt.flow[i] = gt.moved[i] - gt.points[i];
      gt.object_flow[i] = pose.rotation() * gt.displacement[i];
    }
    ProjectedMap projected = project(gt.moved, scene.camera);
    gt.moved_pixels = std::move(projected.pixels);
    gt.moved_pixels_valid = std::move(projected.valid);
    Tensor2 depth(cfg.rows, cfg.cols);
    for (std::size_t i = 0; i < depth.size(); ++i) depth[i] = gt.moved[i].z();
    scene.depth[n] = std::move(depth);
  });
  return scene;
}

PropertyMaps perturb(const PropertyMaps& maps, const NoiseConfig& noise) {
  if (!(noise.point_sigma >= 0.0) || !(noise.flow_sigma >= 0.0)) {
    throw Error(ErrorCode::ConfigInvalid, "noise sigmas must be non-negative");
  }
  if (noise.point_sigma == 0.0 && noise.flow_sigma == 0.0) return maps;

  auto rng = stream(noise.seed, kNoise);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Tensor3 points = maps.points();
  Tensor3 flow = maps.flow();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!maps.valid()[i]) continue;
    const Eigen::Vector3d dp(gauss(rng), gauss(rng), gauss(rng));
    const Eigen::Vector3d df(gauss(rng), gauss(rng), gauss(rng));
    points[i] += noise.point_sigma * dp;
    flow[i] += noise.flow_sigma * df;
  }
  return make_property_maps(std::move(points), std::move(flow), MotionKind::SceneFlow, maps.weights(),
                            maps.confidence(), maps.valid());
}

}  // namespace flowgeom
