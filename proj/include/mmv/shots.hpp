#pragma once

#include <string>
#include <vector>

#include "mmv/image.hpp"
#include "mmv/model.hpp"

namespace mmv {

struct SampledFrame {
  FrameRef ref;
  RgbImage image;
};

// Uniformly sampled frames of one video. Shots produced by detect_shots index
// into `frames` (sampled index space), not the native frame numbering.
struct FrameSequence {
  std::string asset_id;
  std::vector<SampledFrame> frames;
  double native_fps = 0.0;
  int sample_stride = 1;
  std::int64_t native_frame_count = 0;

  bool empty() const { return frames.empty(); }
  std::size_t size() const { return frames.size(); }
  double duration_s() const { return native_fps > 0.0 ? native_frame_count / native_fps : 0.0; }
};

enum class DetectorKind { histogram, sidecar };

struct ShotDetectorConfig {
  DetectorKind detector = DetectorKind::histogram;
  double boundary_threshold = 0.35;  // (0, 2]
  int min_shot_len = 4;              // sampled frames
  double sample_fps = 2.0;

  // Throws Error{InvalidConfig}.
  void validate() const;
};

// Per-gap transition scores: element i-1 scores the cut between frames i-1 and i.
class TransitionScorer {
 public:
  virtual ~TransitionScorer() = default;
  virtual std::vector<double> gap_scores(const FrameSequence& seq) = 0;
};

// L1 distance between normalized 16x4x4 HSV histograms, in [0, 2].
// Throws Error{DimensionMismatch}.
double histogram_distance(const RgbImage& a, const RgbImage& b);

class HistogramScorer final : public TransitionScorer {
 public:
  std::vector<double> gap_scores(const FrameSequence& seq) override;
};

// Boundary rule shared by every scorer: a shot starts at sampled index i when
// score(i-1, i) > threshold, the score beats every gap within min_shot_len - 1
// (at least 1) on either side, earliest first on ties, and both neighbouring
// shots keep at least min_shot_len frames. Frames after a rejected cut stay in
// the preceding shot; a too-short first shot runs on into the next.
std::vector<Shot> shots_from_scores(const std::string& asset_id, std::size_t frame_count,
                                    const std::vector<double>& gap_scores, double threshold,
                                    int min_shot_len);

// The histogram detector is used unless cfg selects the sidecar and a scorer
// is supplied; a scorer failing with SidecarUnavailable also falls back.
std::vector<Shot> detect_shots(const FrameSequence& seq, const ShotDetectorConfig& cfg,
                               TransitionScorer* sidecar_scorer = nullptr);

// Maps sampled-index shots onto native frame numbers so that the result
// covers [0, native_frame_count - 1].
std::vector<Shot> to_native_shots(const FrameSequence& seq, const std::vector<Shot>& sampled_shots);

}  // namespace mmv
