#include "flowgeom/sequence.hpp"

#include <algorithm>
#include <cmath>

#include "flowgeom/parallel.hpp"

namespace flowgeom {

namespace {

double mean_valid_norm(const PropertyMaps& maps) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < maps.points().size(); ++i) {
    if (!maps.valid()[i]) continue;
    sum += maps.points()[i].norm();
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double median(std::vector<double> values) {
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

ScaleAlignment align_scales(const SequencePrediction& sequence, ScaleReference reference) {
  if (sequence.pairs.empty()) throw Error(ErrorCode::DegenerateAnchor, "sequence has no pairs");
  const PropertyMaps& first = sequence.pairs.front();

  ScaleAlignment out;
  for (std::size_t n = 0; n < sequence.pairs.size(); ++n) {
    const PropertyMaps& pair = sequence.pairs[n];
    require_same_shape(first.points(), pair.points(), "pair point map");
    const double s = mean_valid_norm(pair);
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw Error(ErrorCode::DegenerateAnchor,
                  "anchor point map of pair " + std::to_string(n + 1) + " has zero mean norm");
    }
    out.anchor_norms.push_back(s);
  }

  const double ref = reference == ScaleReference::FirstPair ? out.anchor_norms.front()
                                                            : median(out.anchor_norms);
  out.aligned.pairs.reserve(sequence.pairs.size());
  for (std::size_t n = 0; n < sequence.pairs.size(); ++n) {
    const double factor = ref / out.anchor_norms[n];
    out.factors.push_back(factor);
    out.aligned.pairs.push_back(factor == 1.0 ? sequence.pairs[n] : sequence.pairs[n].scaled(factor));
  }
  return out;
}

std::size_t TrackResult::valid_pairs() const {
  return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [](const PairStatus& s) { return s.ok; }));
}

TrackResult build_tracks(const SequencePrediction& aligned, PoseMode mode, Paradigm paradigm) {
  if (paradigm == Paradigm::SlidingWindow) {
    throw Error(ErrorCode::Unsupported, "only anchored pairs are supported");
  }
  if (aligned.pairs.empty()) throw Error(ErrorCode::DegenerateAnchor, "sequence has no pairs");
  const PropertyMaps& anchor = aligned.pairs.front();
  const int rows = anchor.rows();
  const int cols = anchor.cols();
  const std::size_t n_pairs = aligned.pairs.size();

  TrackResult result;
  TrackSet& tracks = result.tracks;
  tracks.points.assign(n_pairs + 1, Tensor3(rows, cols));
  tracks.valid.assign(n_pairs + 1, Mask(rows, cols));
  tracks.poses.assign(n_pairs + 1, RigidTransform::identity());
  result.pairs.assign(n_pairs, PairStatus{});

  tracks.points[0] = anchor.points();
  tracks.valid[0] = anchor.valid();

  parallel_for(n_pairs, [&](std::size_t n) {
    const PropertyMaps& pair = aligned.pairs[n];
    try {
      require_same_shape(anchor.points(), pair.points(), "pair point map");
      const FlowDecomposition d = decompose_flow(pair, mode);
      tracks.points[n + 1] = d.tracked;
      tracks.valid[n + 1] = pair.valid();
      tracks.poses[n + 1] = d.pose;
    } catch (const Error& e) {
      result.pairs[n] = PairStatus{false, e.what()};
    }
  });
  return result;
}

}  // namespace flowgeom
