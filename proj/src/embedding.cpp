#include "mmv/embedding.hpp"

#include <cmath>

#include "mmv/error.hpp"
#include "mmv/features.hpp"
#include "mmv/shots.hpp"

namespace mmv {

Embedding classical_embed(const RgbImage& frame) {
  const HsvHistogram hist = hsv_histogram(frame);
  const LumaGrid luma = luma_grid(frame);
  Embedding e;
  e.extractor_id = std::string(kClassicalExtractorId);
  e.vector.reserve(kClassicalDim);
  e.vector.insert(e.vector.end(), hist.begin(), hist.end());
  e.vector.insert(e.vector.end(), luma.begin(), luma.end());
  return e;
}

std::vector<Embedding> ClassicalEmbedder::embed(FrameList frames) {
  std::vector<Embedding> out;
  out.reserve(frames.size());
  for (const RgbImage* f : frames) out.push_back(classical_embed(*f));
  return out;
}

void l2_normalize(std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq == 0.0) return;
  const double norm = std::sqrt(sq);
  for (double& x : v) x /= norm;
}

std::vector<Embedding> embed_frames(FrameList frames, const EmbedderConfig& cfg, FrameEmbedder* sidecar) {
  if (frames.empty()) throw Error(Errc::InvalidArgument, "no frames to embed");
  for (const RgbImage* f : frames) {
    if (f == nullptr || f->empty()) throw Error(Errc::InvalidArgument, "empty frame buffer");
    if (!f->same_size(*frames.front())) throw Error(Errc::DimensionMismatch, "frames differ in size");
  }

  std::vector<Embedding> out;
  if (cfg.embedder == EmbedderKind::sidecar) {
    try {
      if (sidecar == nullptr) throw Error(Errc::SidecarUnavailable, "no sidecar embedder configured");
      out = sidecar->embed(frames);
    } catch (const Error& e) {
      if (e.code() != Errc::SidecarUnavailable || !cfg.fallback_to_classical) throw;
      out.clear();
    }
  }
  if (out.empty()) {
    ClassicalEmbedder classical;
    out = classical.embed(frames);
  }
  if (out.size() != frames.size()) throw Error(Errc::DimMismatch, "embedder returned the wrong count");

  for (auto& e : out) {
    if (e.dim() != out.front().dim() || e.extractor_id != out.front().extractor_id) {
      throw Error(Errc::DimMismatch, "embedder produced mixed shapes");
    }
    for (double x : e.vector) {
      if (!std::isfinite(x)) throw Error(Errc::InvalidArgument, "embedder produced a non-finite value");
    }
    if (cfg.normalize) l2_normalize(e.vector);
  }
  return out;
}

std::vector<const RgbImage*> frame_pointers(const FrameSequence& seq) {
  std::vector<const RgbImage*> out;
  out.reserve(seq.size());
  for (const auto& f : seq.frames) out.push_back(&f.image);
  return out;
}

}  // namespace mmv
