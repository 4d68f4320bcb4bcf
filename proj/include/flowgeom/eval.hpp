#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "flowgeom/sequence.hpp"

namespace flowgeom {

enum class Alignment { MedianScale, None };

std::string_view to_string(Alignment alignment);
Alignment parse_alignment(std::string_view name);

struct MetricConfig {
  std::vector<double> thresholds{0.1, 0.3, 0.5, 1.0};  // meters, positive ascending
  int max_frames = 64;
  Alignment alignment = Alignment::MedianScale;

  // Errors: ConfigInvalid.
  void validate() const;
};

struct SubsetMetrics {
  std::vector<double> apd;  // percent per threshold
  double apd_mean = 0.0;    // mean over thresholds
  double epe = 0.0;         // meters
  std::size_t n_points = 0; // (point, frame) samples evaluated
};

struct MetricReport {
  std::vector<double> thresholds;
  Alignment alignment = Alignment::MedianScale;
  SubsetMetrics all;
  std::optional<SubsetMetrics> dynamic;
  double scale_applied = 1.0;
  std::size_t n_frames = 0;
};

// median(‖gt‖) / median(‖pred‖) over matched points.
// Errors: DegenerateSet (no points, or zero median norm), ShapeMismatch.
double median_scale(std::span<const Eigen::Vector3d> pred, std::span<const Eigen::Vector3d> gt);

struct AlignedTracks {
  TrackSet tracks;
  double scale = 1.0;
};

// One global scale over the mutually valid samples of the first max_frames
// frames, applied to every predicted point. Errors: DegenerateSet,
// IdentityMismatch.
AlignedTracks median_align(const TrackSet& pred, const TrackSet& gt, int max_frames = 64);

// Mean Euclidean distance of matched points. Errors: EmptyIntersection.
double epe(std::span<const Eigen::Vector3d> pred, std::span<const Eigen::Vector3d> gt);
double epe(const TrackSet& pred, const TrackSet& gt, int max_frames = 64);

// Percentage of (point, frame) samples with error strictly below each
// threshold, over frames [0, max_frames). Samples invalid in either set are
// excluded. When `dynamic_mask` is non-empty (default: gt.dynamic_mask) the
// dynamic subset is reported as well.
// Errors: IdentityMismatch, EmptyIntersection, ConfigInvalid.
MetricReport apd3d(const TrackSet& pred, const TrackSet& gt, const MetricConfig& config = {});

// Flat "key=value" lines in a fixed order.
std::string to_key_value(const MetricReport& report);

}  // namespace flowgeom
