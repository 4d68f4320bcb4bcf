#include <gtest/gtest.h>

#include "flowgeom/error.hpp"
#include "flowgeom/sequence.hpp"
#include "flowgeom/synthetic.hpp"
#include "helpers.hpp"

namespace flowgeom {
namespace {

SequencePrediction oracle_sequence(const SyntheticScene& scene) {
  SequencePrediction seq;
  for (const auto& gt : scene.pairs) seq.pairs.push_back(gt.maps());
  return seq;
}

TEST(Sequence, ScaleAlignmentUndoesGlobalScale) {
  SceneConfig cfg;
  cfg.n_frames = 4;
  const SyntheticScene scene = generate(cfg);
  SequencePrediction seq = oracle_sequence(scene);
  seq.pairs[1] = seq.pairs[1].scaled(3.0);
  const ScaleAlignment a = align_scales(seq);
  EXPECT_NEAR(a.factors[0], 1.0, 1e-15);
  EXPECT_NEAR(a.factors[1], 1.0 / 3.0, 1e-15);
  EXPECT_LT(test::max_diff(a.aligned.pairs[1].points(), scene.pairs[1].points), 1e-12);

  const ScaleAlignment m = align_scales(seq, ScaleReference::MedianPair);
  EXPECT_NEAR(m.factors[0], 1.0, 1e-12);
  EXPECT_NEAR(m.factors[1], 1.0 / 3.0, 1e-12);
}

TEST(Sequence, StaticTracksStayPut) {
  SceneConfig cfg;
  cfg.dynamic_fraction = 0.0;
  cfg.n_frames = 5;
  const SyntheticScene scene = generate(cfg);
  const TrackResult r = build_tracks(align_scales(oracle_sequence(scene)).aligned);
  EXPECT_EQ(r.valid_pairs(), 4u);
  ASSERT_EQ(r.tracks.n_frames(), 5u);
  for (std::size_t n = 0; n < 5; ++n) {
    EXPECT_LT(test::max_diff(r.tracks.points[n], scene.anchor_points), 1e-9);
    EXPECT_LT(rotation_error(r.tracks.poses[n], scene.poses[n]), 1e-9);
    EXPECT_LT(translation_error(r.tracks.poses[n], scene.poses[n]), 1e-9);
  }
}

TEST(Sequence, DynamicTracksFollowMovers) {
  SceneConfig cfg;
  cfg.n_frames = 4;
  cfg.seed = 3;
  const SyntheticScene scene = generate(cfg);
  const TrackResult r = build_tracks(oracle_sequence(scene));
  for (std::size_t n = 1; n < 4; ++n) {
    EXPECT_LT(test::max_diff(r.tracks.points[n], scene.pairs[n - 1].tracks), 1e-9);
  }
}

TEST(Sequence, FailedPairIsSkipped) {
  SceneConfig cfg;
  cfg.n_frames = 3;
  cfg.rows = cfg.cols = 8;
  const SyntheticScene scene = generate(cfg);
  SequencePrediction seq = oracle_sequence(scene);
  // All weight on two pixels: not enough support for a pose.
  Tensor2 w(8, 8);
  w[0] = 0.5;
  w[1] = 0.5;
  seq.pairs[1] = make_property_maps(scene.pairs[1].points, scene.pairs[1].moved, MotionKind::MovedPoints, w,
                                    Tensor2(8, 8, 2.0));
  const TrackResult r = build_tracks(seq);
  EXPECT_EQ(r.valid_pairs(), 1u);
  EXPECT_FALSE(r.pairs[1].ok);
  EXPECT_NE(r.pairs[1].message.find("InsufficientSupport"), std::string::npos);
  EXPECT_EQ(count(r.tracks.valid[2]), 0u);
  EXPECT_EQ(count(r.tracks.valid[1]), 64u);
}

TEST(Sequence, Errors) {
  EXPECT_THROW(align_scales({}), Error);
  SceneConfig cfg;
  cfg.rows = cfg.cols = 8;
  const SyntheticScene scene = generate(cfg);
  try {
    build_tracks(oracle_sequence(scene), PoseMode::ClosedForm, Paradigm::SlidingWindow);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unsupported);
  }
  SequencePrediction zero;
  zero.pairs.push_back(make_property_maps(Tensor3(8, 8), Tensor3(8, 8), MotionKind::SceneFlow,
                                          Tensor2(8, 8, 1.0 / 64), Tensor2(8, 8, 2.0)));
  try {
    align_scales(zero);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateAnchor);
  }
}

}  // namespace
}  // namespace flowgeom
