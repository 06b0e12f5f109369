#include "mmv/keyframes.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <tuple>

#include "mmv/error.hpp"

namespace mmv {

namespace {

struct Candidate {
  std::size_t index;
  double distance;
  double timestamp;
};

bool closer(const Candidate& a, const Candidate& b) {
  return std::tie(a.distance, a.timestamp, a.index) < std::tie(b.distance, b.timestamp, b.index);
}

// Per populated cluster, the `per_cluster` nearest members.
std::vector<std::pair<int, std::vector<Candidate>>> nearest_members(
    const ClusteringResult& clusters, std::span<const Embedding> embeddings,
    std::span<const double> timestamps, int per_cluster) {
  std::vector<std::vector<Candidate>> groups(static_cast<std::size_t>(clusters.k));
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    const auto c = static_cast<std::size_t>(clusters.assignments[i]);
    groups[c].push_back({i, euclidean_distance(embeddings[i].vector, clusters.centroids[c]), timestamps[i]});
  }
  std::vector<std::pair<int, std::vector<Candidate>>> out;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    auto& g = groups[c];
    if (g.empty()) continue;
    std::sort(g.begin(), g.end(), closer);
    if (g.size() > static_cast<std::size_t>(per_cluster)) g.resize(static_cast<std::size_t>(per_cluster));
    out.emplace_back(static_cast<int>(c), std::move(g));
  }
  return out;
}

std::vector<Keyframe> representatives(std::span<const FrameRef> frames, std::span<const Shot> shots,
                                      std::span<const Embedding> embeddings, const ClusteringConfig& cfg) {
  if (frames.empty() || frames.size() != embeddings.size()) {
    throw Error(Errc::InvalidArgument, "frames and embeddings must be aligned and non-empty");
  }
  const ClusteringResult clusters = select_k(embeddings, cfg);
  std::vector<double> ts(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) ts[i] = frames[i].timestamp_s;

  std::vector<Keyframe> out;
  for (auto& [cluster, members] : nearest_members(clusters, embeddings, ts, cfg.frames_per_cluster)) {
    for (const auto& m : members) out.push_back(Keyframe{frames[m.index], shots[m.index], cluster, m.distance});
  }
  std::sort(out.begin(), out.end(), [](const Keyframe& a, const Keyframe& b) {
    return std::tie(a.frame.asset_id, a.frame.timestamp_s, a.frame.frame_index) <
           std::tie(b.frame.asset_id, b.frame.timestamp_s, b.frame.frame_index);
  });
  return out;
}

}  // namespace

std::vector<Keyframe> select_shot_keyframes(const Shot& shot, std::span<const FrameRef> frames,
                                            std::span<const Embedding> embeddings,
                                            const ClusteringConfig& cfg) {
  const std::vector<Shot> shots(frames.size(), shot);
  return representatives(frames, shots, embeddings, cfg);
}

std::vector<Keyframe> select_image_keyframes(std::span<const FrameRef> images,
                                             std::span<const Embedding> embeddings,
                                             const ClusteringConfig& cfg) {
  std::vector<Shot> shots;
  shots.reserve(images.size());
  for (const auto& f : images) shots.push_back(Shot{f.asset_id, f.frame_index, f.frame_index});
  return representatives(images, shots, embeddings, cfg);
}

std::vector<std::size_t> aggregate_case_keyframe_indices(std::span<const Keyframe> keyframes,
                                                         std::span<const Embedding> embeddings,
                                                         const ClusteringConfig& cfg) {
  cfg.validate();
  if (keyframes.empty() || keyframes.size() != embeddings.size()) {
    throw Error(Errc::InvalidArgument, "keyframes and embeddings must be aligned and non-empty");
  }
  std::vector<std::size_t> keep(keyframes.size());
  std::iota(keep.begin(), keep.end(), 0);
  if (keyframes.size() <= static_cast<std::size_t>(cfg.case_budget)) return keep;

  const ClusteringResult clusters = kmeans(embeddings, cfg.case_budget, cfg.seed, cfg.max_iters, cfg.tol);
  std::vector<double> ts(keyframes.size());
  for (std::size_t i = 0; i < keyframes.size(); ++i) ts[i] = keyframes[i].frame.timestamp_s;
  keep.clear();
  for (auto& [cluster, members] : nearest_members(clusters, embeddings, ts, 1)) keep.push_back(members.front().index);
  std::sort(keep.begin(), keep.end());
  return keep;
}

std::vector<Keyframe> aggregate_case_keyframes(std::span<const Keyframe> keyframes,
                                               std::span<const Embedding> embeddings,
                                               const ClusteringConfig& cfg) {
  const auto keep = aggregate_case_keyframe_indices(keyframes, embeddings, cfg);
  std::vector<Keyframe> out;
  out.reserve(keep.size());
  if (keyframes.size() <= static_cast<std::size_t>(cfg.case_budget)) {
    out.assign(keyframes.begin(), keyframes.end());
    return out;
  }
  // Re-label with the aggregation clusters so the manifest describes the final pass.
  const ClusteringResult clusters = kmeans(embeddings, cfg.case_budget, cfg.seed, cfg.max_iters, cfg.tol);
  for (std::size_t i : keep) {
    Keyframe k = keyframes[i];
    k.cluster_id = clusters.assignments[i];
    k.distance_to_centroid =
        euclidean_distance(embeddings[i].vector, clusters.centroids[static_cast<std::size_t>(k.cluster_id)]);
    out.push_back(std::move(k));
  }
  return out;
}

std::vector<PreparedImage> prepare_llm_images(std::span<const Keyframe> keyframes,
                                              std::span<const RgbImage> images, int max_side,
                                              int jpeg_quality) {
  if (keyframes.size() != images.size()) {
    throw Error(Errc::InvalidArgument, "one image buffer per keyframe required");
  }
  std::vector<PreparedImage> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].empty()) throw Error(Errc::EncodeFailure, "empty image buffer");
    RgbImage scaled = resize_longer_side(images[i], max_side);
    PreparedImage p;
    p.keyframe = keyframes[i];
    p.width = scaled.width;
    p.height = scaled.height;
    p.jpeg = encode_jpeg(scaled, jpeg_quality);
    p.base64 = base64_encode(p.jpeg);
    out.push_back(std::move(p));
  }
  return out;
}

std::string keyframe_image_name(std::size_t n) { return "kf_" + std::to_string(n) + ".jpg"; }

void write_keyframe_manifest(const std::filesystem::path& dir, std::span<const PreparedImage> images) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  // Drop images left over from a previous, larger selection.
  for (std::size_t n = images.size();; ++n) {
    if (!std::filesystem::remove(dir / keyframe_image_name(n), ec)) break;
  }
  json manifest = json::array();
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto path = dir / keyframe_image_name(n);
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(images[n].jpeg.data()),
              static_cast<std::streamsize>(images[n].jpeg.size()));
    if (!out) throw Error(Errc::PersistFailure, "cannot write " + path.string());
    manifest.push_back(images[n].keyframe);
  }
  std::ofstream out(dir / "keyframes.json");
  out << dump_json(manifest);
  if (!out) throw Error(Errc::PersistFailure, "cannot write " + (dir / "keyframes.json").string());
}

std::vector<ManifestEntry> read_keyframe_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "keyframes.json");
  if (!in) throw Error(Errc::PersistFailure, "cannot read " + (dir / "keyframes.json").string());
  const json manifest = json::parse(in, nullptr, false);
  if (manifest.is_discarded() || !manifest.is_array()) {
    throw Error(Errc::PersistFailure, "keyframes.json is not a JSON array");
  }
  std::vector<ManifestEntry> out;
  for (std::size_t n = 0; n < manifest.size(); ++n) {
    out.push_back({manifest[n].get<Keyframe>(), dir / keyframe_image_name(n)});
  }
  return out;
}

}  // namespace mmv
