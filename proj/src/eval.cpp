#include "flowgeom/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace flowgeom {

std::string_view to_string(Alignment alignment) {
  return alignment == Alignment::MedianScale ? "median_scale" : "none";
}

Alignment parse_alignment(std::string_view name) {
  if (name == "median_scale" || name == "median") return Alignment::MedianScale;
  if (name == "none") return Alignment::None;
  throw Error(ErrorCode::ConfigInvalid, "unknown alignment '" + std::string(name) + "'");
}

void MetricConfig::validate() const {
  if (thresholds.empty()) throw Error(ErrorCode::ConfigInvalid, "no thresholds");
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    if (!(thresholds[k] > 0.0) || !std::isfinite(thresholds[k]) ||
        (k > 0 && !(thresholds[k] > thresholds[k - 1]))) {
      throw Error(ErrorCode::ConfigInvalid, "thresholds must be positive and strictly ascending");
    }
  }
  if (max_frames <= 0) throw Error(ErrorCode::ConfigInvalid, "max_frames must be positive");
}

namespace {

double median_of(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  return 0.5 * (*std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)) + upper);
}

void require_matching(const TrackSet& pred, const TrackSet& gt) {
  if (pred.n_frames() == 0 || gt.n_frames() == 0) {
    throw Error(ErrorCode::EmptyIntersection, "track set has no frames");
  }
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw Error(ErrorCode::IdentityMismatch, "point identities differ: " +
                                                 shape_string(pred.rows(), pred.cols()) + " vs " +
                                                 shape_string(gt.rows(), gt.cols()));
  }
  if (pred.n_frames() != gt.n_frames()) {
    throw Error(ErrorCode::IdentityMismatch, "frame counts differ: " + std::to_string(pred.n_frames()) +
                                                 " vs " + std::to_string(gt.n_frames()));
  }
  if (pred.valid.size() != pred.n_frames() || gt.valid.size() != gt.n_frames()) {
    throw Error(ErrorCode::ShapeMismatch, "one validity mask per frame required");
  }
}

std::size_t frames_used(const TrackSet& t, int max_frames) {
  return std::min(t.n_frames(), static_cast<std::size_t>(max_frames));
}

bool sample_valid(const TrackSet& pred, const TrackSet& gt, std::size_t f, std::size_t i) {
  return mask_at(pred.valid[f], i) && mask_at(gt.valid[f], i) && pred.points[f][i].allFinite() &&
         gt.points[f][i].allFinite();
}

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

}  // namespace

double median_scale(std::span<const Eigen::Vector3d> pred, std::span<const Eigen::Vector3d> gt) {
  if (pred.size() != gt.size()) throw Error(ErrorCode::ShapeMismatch, "point sets differ in size");
  if (pred.empty()) throw Error(ErrorCode::DegenerateSet, "no matched points");
  std::vector<double> pn;
  std::vector<double> gn;
  pn.reserve(pred.size());
  gn.reserve(gt.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pn.push_back(pred[i].norm());
    gn.push_back(gt[i].norm());
  }
  const double mp = median_of(pn);
  const double mg = median_of(gn);
  if (!(mp > 0.0) || !(mg > 0.0)) throw Error(ErrorCode::DegenerateSet, "median point norm is zero");
  return mg / mp;
}

AlignedTracks median_align(const TrackSet& pred, const TrackSet& gt, int max_frames) {
  require_matching(pred, gt);
  std::vector<Eigen::Vector3d> p;
  std::vector<Eigen::Vector3d> g;
  const std::size_t frames = frames_used(pred, max_frames);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t i = 0; i < pred.points[f].size(); ++i) {
      if (!sample_valid(pred, gt, f, i)) continue;
      p.push_back(pred.points[f][i]);
      g.push_back(gt.points[f][i]);
    }
  }
  AlignedTracks out{pred, median_scale(p, g)};
  for (auto& frame : out.tracks.points) {
    for (auto& x : frame.values()) x *= out.scale;
  }
  return out;
}

double epe(std::span<const Eigen::Vector3d> pred, std::span<const Eigen::Vector3d> gt) {
  if (pred.size() != gt.size()) throw Error(ErrorCode::ShapeMismatch, "point sets differ in size");
  if (pred.empty()) throw Error(ErrorCode::EmptyIntersection, "no matched points");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += (pred[i] - gt[i]).norm();
  return sum / static_cast<double>(pred.size());
}

double epe(const TrackSet& pred, const TrackSet& gt, int max_frames) {
  require_matching(pred, gt);
  double sum = 0.0;
  std::size_t n = 0;
  const std::size_t frames = frames_used(pred, max_frames);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t i = 0; i < pred.points[f].size(); ++i) {
      if (!sample_valid(pred, gt, f, i)) continue;
      sum += (pred.points[f][i] - gt.points[f][i]).norm();
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorCode::EmptyIntersection, "no mutually valid samples");
  return sum / static_cast<double>(n);
}

MetricReport apd3d(const TrackSet& pred, const TrackSet& gt, const MetricConfig& config) {
  config.validate();
  require_matching(pred, gt);
  const Mask& dynamic = gt.dynamic_mask;
  if (!dynamic.empty() && (dynamic.rows() != gt.rows() || dynamic.cols() != gt.cols())) {
    throw Error(ErrorCode::IdentityMismatch, "dynamic mask does not match the point grid");
  }

  MetricReport report;
  report.thresholds = config.thresholds;
  report.alignment = config.alignment;
  report.n_frames = frames_used(pred, config.max_frames);

  const TrackSet* evaluated = &pred;
  AlignedTracks aligned;
  if (config.alignment == Alignment::MedianScale) {
    aligned = median_align(pred, gt, config.max_frames);
    evaluated = &aligned.tracks;
    report.scale_applied = aligned.scale;
  }

  const std::size_t n_thr = config.thresholds.size();
  struct Accumulator {
    std::vector<std::size_t> hits;
    double error_sum = 0.0;
    std::size_t n = 0;
  };
  Accumulator all{std::vector<std::size_t>(n_thr, 0)};
  Accumulator dyn{std::vector<std::size_t>(n_thr, 0)};

  for (std::size_t f = 0; f < report.n_frames; ++f) {
    for (std::size_t i = 0; i < gt.points[f].size(); ++i) {
      if (!sample_valid(*evaluated, gt, f, i)) continue;
      const double e = (evaluated->points[f][i] - gt.points[f][i]).norm();
      const bool is_dyn = !dynamic.empty() && dynamic[i];
      for (Accumulator* acc : {&all, is_dyn ? &dyn : nullptr}) {
        if (!acc) continue;
        for (std::size_t k = 0; k < n_thr; ++k) acc->hits[k] += e < config.thresholds[k];
        acc->error_sum += e;
        ++acc->n;
      }
    }
  }
  if (all.n == 0) throw Error(ErrorCode::EmptyIntersection, "no mutually valid samples");

  auto summarize = [&](const Accumulator& acc) {
    SubsetMetrics m;
    m.n_points = acc.n;
    if (acc.n == 0) return m;
    for (std::size_t k = 0; k < n_thr; ++k) {
      m.apd.push_back(100.0 * static_cast<double>(acc.hits[k]) / static_cast<double>(acc.n));
    }
    double sum = 0.0;
    for (double a : m.apd) sum += a;
    m.apd_mean = sum / static_cast<double>(n_thr);
    m.epe = acc.error_sum / static_cast<double>(acc.n);
    return m;
  };
  report.all = summarize(all);
  if (!dynamic.empty()) report.dynamic = summarize(dyn);
  return report;
}

std::string to_key_value(const MetricReport& r) {
  std::ostringstream out;
  out << "format_version=1\n";
  out << "alignment=" << to_string(r.alignment) << "\n";
  out << "scale_applied=" << format_number(r.scale_applied) << "\n";
  out << "n_frames=" << r.n_frames << "\n";
  auto subset = [&](const std::string& prefix, const SubsetMetrics& m) {
    out << prefix << "n_points=" << m.n_points << "\n";
    for (std::size_t k = 0; k < m.apd.size(); ++k) {
      out << prefix << "apd@" << format_number(r.thresholds[k]) << "=" << format_number(m.apd[k]) << "\n";
    }
    out << prefix << "apd_mean=" << format_number(m.apd_mean) << "\n";
    out << prefix << "epe=" << format_number(m.epe) << "\n";
  };
  subset("all.", r.all);
  if (r.dynamic) subset("dynamic.", *r.dynamic);
  return out.str();
}

}  // namespace flowgeom
