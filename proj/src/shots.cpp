#include "mmv/shots.hpp"

#include <cmath>
#include <limits>

#include "mmv/error.hpp"
#include "mmv/features.hpp"

namespace mmv {

void ShotDetectorConfig::validate() const {
  if (!(boundary_threshold > 0.0 && boundary_threshold <= 2.0)) {
    throw Error(Errc::InvalidConfig, "boundary_threshold must be in (0, 2]");
  }
  if (min_shot_len < 1) throw Error(Errc::InvalidConfig, "min_shot_len must be >= 1");
  if (!(sample_fps > 0.0) || !std::isfinite(sample_fps)) {
    throw Error(Errc::InvalidConfig, "sample_fps must be > 0");
  }
}

double histogram_distance(const RgbImage& a, const RgbImage& b) {
  if (!a.same_size(b)) {
    throw Error(Errc::DimensionMismatch, "frames differ in size: " + std::to_string(a.width) + "x" +
                                             std::to_string(a.height) + " vs " +
                                             std::to_string(b.width) + "x" + std::to_string(b.height));
  }
  const HsvHistogram ha = hsv_histogram(a);
  const HsvHistogram hb = hsv_histogram(b);
  double d = 0.0;
  for (std::size_t i = 0; i < kHsvBins; ++i) d += std::abs(ha[i] - hb[i]);
  return std::min(d, 2.0);
}

std::vector<double> HistogramScorer::gap_scores(const FrameSequence& seq) {
  std::vector<double> scores;
  if (seq.size() < 2) return scores;
  scores.reserve(seq.size() - 1);
  HsvHistogram prev = hsv_histogram(seq.frames[0].image);
  for (std::size_t i = 1; i < seq.size(); ++i) {
    if (!seq.frames[i].image.same_size(seq.frames[i - 1].image)) {
      throw Error(Errc::DimensionMismatch, "frame sequence has mixed frame sizes");
    }
    HsvHistogram cur = hsv_histogram(seq.frames[i].image);
    double d = 0.0;
    for (std::size_t b = 0; b < kHsvBins; ++b) d += std::abs(prev[b] - cur[b]);
    scores.push_back(std::min(d, 2.0));
    prev = cur;
  }
  return scores;
}

std::vector<Shot> shots_from_scores(const std::string& asset_id, std::size_t frame_count,
                                    const std::vector<double>& gap_scores, double threshold,
                                    int min_shot_len) {
  if (frame_count == 0) throw Error(Errc::InvalidArgument, "no frames to segment");
  if (gap_scores.size() + 1 != frame_count) {
    throw Error(Errc::InvalidArgument, "expected one score per frame gap");
  }
  constexpr double kNone = -std::numeric_limits<double>::infinity();
  // score(i) is the gap ending at frame i, for i in [1, n).
  auto score = [&](std::size_t i) { return (i >= 1 && i < frame_count) ? gap_scores[i - 1] : kNone; };

  // Non-maximum suppression over a window of min_shot_len - 1 gaps (at least
  // one) on each side; among equal scores the earliest gap wins. Surviving
  // cuts are therefore min_shot_len apart, and the window ignores the
  // threshold, so raising it only removes cuts.
  const auto n = static_cast<std::int64_t>(frame_count);
  const std::int64_t min_len = std::max(1, min_shot_len);
  const std::int64_t radius = std::max<std::int64_t>(1, min_len - 1);
  std::vector<Shot> out{{asset_id, 0, n - 1}};
  for (std::int64_t b = 1; b < n; ++b) {
    const double s = score(static_cast<std::size_t>(b));
    if (!(s > threshold) || b < min_len || n - b < min_len) continue;
    bool peak = true;
    for (std::int64_t j = std::max<std::int64_t>(1, b - radius); j <= std::min(n - 1, b + radius) && peak; ++j) {
      const double other = score(static_cast<std::size_t>(j));
      peak = j < b ? s > other : (j == b || s >= other);
    }
    if (!peak) continue;
    out.back().end_frame = b - 1;
    out.push_back({asset_id, b, n - 1});
  }
  return out;
}

std::vector<Shot> detect_shots(const FrameSequence& seq, const ShotDetectorConfig& cfg,
                               TransitionScorer* sidecar_scorer) {
  cfg.validate();
  if (seq.empty()) throw Error(Errc::InvalidArgument, "cannot segment an empty frame sequence");
  std::vector<double> scores;
  bool scored = false;
  if (cfg.detector == DetectorKind::sidecar && sidecar_scorer != nullptr) {
    try {
      scores = sidecar_scorer->gap_scores(seq);
      scored = true;
    } catch (const Error& e) {
      if (e.code() != Errc::SidecarUnavailable) throw;
    }
  }
  if (!scored) {
    HistogramScorer histogram;
    scores = histogram.gap_scores(seq);
  }
  return shots_from_scores(seq.asset_id, seq.size(), scores, cfg.boundary_threshold, cfg.min_shot_len);
}

std::vector<Shot> to_native_shots(const FrameSequence& seq, const std::vector<Shot>& sampled_shots) {
  std::vector<Shot> out;
  out.reserve(sampled_shots.size());
  const std::int64_t last_native =
      std::max<std::int64_t>(seq.native_frame_count, seq.frames.empty() ? 0 : seq.frames.back().ref.frame_index + 1) -
      1;
  for (std::size_t k = 0; k < sampled_shots.size(); ++k) {
    const Shot& s = sampled_shots[k];
    Shot native{s.asset_id, k == 0 ? 0 : seq.frames[static_cast<std::size_t>(s.start_frame)].ref.frame_index, 0};
    if (k + 1 < sampled_shots.size()) {
      native.end_frame =
          seq.frames[static_cast<std::size_t>(sampled_shots[k + 1].start_frame)].ref.frame_index - 1;
    } else {
      native.end_frame = last_native;
    }
    out.push_back(native);
  }
  return out;
}

}  // namespace mmv
