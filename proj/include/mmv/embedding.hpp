#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmv/image.hpp"
#include "mmv/model.hpp"

namespace mmv {

struct FrameSequence;

inline constexpr std::string_view kClassicalExtractorId = "classical-v1";
inline constexpr std::size_t kClassicalDim = 320;

enum class EmbedderKind { classical, sidecar };

struct EmbedderConfig {
  EmbedderKind embedder = EmbedderKind::classical;
  bool normalize = true;
  bool fallback_to_classical = true;
};

using FrameList = std::span<const RgbImage* const>;

class FrameEmbedder {
 public:
  virtual ~FrameEmbedder() = default;
  // One raw (unnormalized) embedding per frame.
  virtual std::vector<Embedding> embed(FrameList frames) = 0;
};

// HSV histogram (256) followed by the 8x8 luma grid (64); not normalized.
Embedding classical_embed(const RgbImage& frame);

class ClassicalEmbedder final : public FrameEmbedder {
 public:
  std::vector<Embedding> embed(FrameList frames) override;
};

// Zero vectors are left untouched.
void l2_normalize(std::vector<double>& v);

// Uses `sidecar` when cfg selects it. A sidecar that throws
// Error{SidecarUnavailable} (or is missing) falls back to the classical
// embedder when cfg.fallback_to_classical, otherwise the error propagates.
std::vector<Embedding> embed_frames(FrameList frames, const EmbedderConfig& cfg,
                                    FrameEmbedder* sidecar = nullptr);

std::vector<const RgbImage*> frame_pointers(const FrameSequence& seq);

}  // namespace mmv
