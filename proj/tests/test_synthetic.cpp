#include <cmath>

#include <gtest/gtest.h>

#include "flowgeom/error.hpp"
#include "flowgeom/synthetic.hpp"
#include "helpers.hpp"

namespace flowgeom {
namespace {

TEST(Synthetic, DeterministicPerSeed) {
  SceneConfig cfg;
  cfg.seed = 42;
  cfg.n_frames = 3;
  const SyntheticScene a = generate(cfg);
  const SyntheticScene b = generate(cfg);
  ASSERT_EQ(a.pairs.size(), 2u);
  for (std::size_t n = 0; n < a.pairs.size(); ++n) {
    EXPECT_EQ(a.pairs[n].moved, b.pairs[n].moved);
    EXPECT_EQ(a.pairs[n].pose.matrix(), b.pairs[n].pose.matrix());
  }
  cfg.seed = 43;
  EXPECT_FALSE(generate(cfg).pairs[0].moved == a.pairs[0].moved);
}

TEST(Synthetic, GroundTruthIsConsistent) {
  SceneConfig cfg;
  cfg.seed = 8;
  cfg.n_frames = 4;
  cfg.dynamic_displacement_max = 2.0;
  const SyntheticScene scene = generate(cfg);
  const std::size_t hw = 64 * 64;
  EXPECT_EQ(count(scene.dynamic_mask), static_cast<std::size_t>(std::lround(0.3 * hw)));
  for (const PairGroundTruth& gt : scene.pairs) {
    double wsum = 0.0;
    for (std::size_t i = 0; i < hw; ++i) {
      wsum += gt.oracle_weights[i];
      const Eigen::Vector3d expected = gt.pose * (gt.points[i] + gt.displacement[i]);
      EXPECT_LT((gt.moved[i] - expected).norm(), 1e-12);
      EXPECT_LT((gt.object_flow[i] - gt.pose.rotation() * gt.displacement[i]).norm(), 1e-12);
      if (!scene.dynamic_mask[i]) {
        EXPECT_EQ(gt.displacement[i], Eigen::Vector3d::Zero());
      } else {
        EXPECT_EQ(gt.oracle_weights[i], 0.0);
        EXPECT_LE(gt.displacement[i].norm(), 2.0 + 1e-12);
      }
      EXPECT_DOUBLE_EQ(scene.depth[gt.frame][i], gt.moved[i].z());
    }
    EXPECT_NEAR(wsum, 1.0, 1e-12);
  }
  // The anchor points back-project the anchor depth.
  for (std::size_t i = 0; i < hw; ++i) {
    EXPECT_GE(scene.anchor_points[i].z(), cfg.depth_range[0]);
    EXPECT_LE(scene.anchor_points[i].z(), cfg.depth_range[1]);
    EXPECT_DOUBLE_EQ(scene.depth[0][i], scene.anchor_points[i].z());
  }
}

TEST(Synthetic, StaticSceneHasNoMovers) {
  SceneConfig cfg;
  cfg.dynamic_fraction = 0.0;
  const SyntheticScene scene = generate(cfg);
  EXPECT_EQ(count(scene.dynamic_mask), 0u);
  EXPECT_LT(test::max_norm(scene.pairs[0].object_flow), 1e-300);
}

TEST(Synthetic, RejectsBadConfigs) {
  auto code = [](SceneConfig cfg) {
    try {
      validate(cfg);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Unsupported;
  };
  SceneConfig cfg;
  cfg.n_frames = 1;
  EXPECT_EQ(code(cfg), ErrorCode::ConfigInvalid);
  cfg = {};
  cfg.focal = -1.0;
  EXPECT_EQ(code(cfg), ErrorCode::ConfigInvalid);
  cfg = {};
  cfg.depth_range = {3.0, 2.0};
  EXPECT_EQ(code(cfg), ErrorCode::ConfigInvalid);
  cfg = {};
  cfg.dynamic_fraction = 1.0;
  EXPECT_EQ(code(cfg), ErrorCode::ConfigInvalid);
  cfg = {};
  cfg.rows = 0;
  EXPECT_EQ(code(cfg), ErrorCode::ConfigInvalid);
}

TEST(Synthetic, NoiseIsSeededAndOptional) {
  const SyntheticScene scene = generate({});
  const PropertyMaps clean = scene.pairs[0].maps();
  EXPECT_EQ(perturb(clean, {}).points(), clean.points());
  const PropertyMaps a = perturb(clean, {0.01, 0.02, 1});
  const PropertyMaps b = perturb(clean, {0.01, 0.02, 1});
  EXPECT_EQ(a.moved(), b.moved());
  EXPECT_FALSE(a.points() == clean.points());
  EXPECT_THROW(perturb(clean, {-1.0, 0.0, 0}), Error);
}

}  // namespace
}  // namespace flowgeom
