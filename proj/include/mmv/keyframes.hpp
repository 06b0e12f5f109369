#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mmv/clustering.hpp"
#include "mmv/image.hpp"
#include "mmv/model.hpp"

namespace mmv {

// Clusters one shot's frames (k chosen by silhouette) and returns, per
// cluster, the frames_per_cluster frames nearest the centroid; equal
// distances go to the earlier timestamp. Output is in timestamp order.
std::vector<Keyframe> select_shot_keyframes(const Shot& shot, std::span<const FrameRef> frames,
                                            std::span<const Embedding> embeddings,
                                            const ClusteringConfig& cfg);

// Multi-image path: the same selection run across a case's still images.
// A single image is returned as is.
std::vector<Keyframe> select_image_keyframes(std::span<const FrameRef> images,
                                             std::span<const Embedding> embeddings,
                                             const ClusteringConfig& cfg);

// Final cross-asset pass. Under budget everything is kept; otherwise k-means
// with k = case_budget and the nearest member of each cluster survives.
// Returns indices into the input, ascending.
std::vector<std::size_t> aggregate_case_keyframe_indices(std::span<const Keyframe> keyframes,
                                                         std::span<const Embedding> embeddings,
                                                         const ClusteringConfig& cfg);

std::vector<Keyframe> aggregate_case_keyframes(std::span<const Keyframe> keyframes,
                                               std::span<const Embedding> embeddings,
                                               const ClusteringConfig& cfg);

struct PreparedImage {
  Keyframe keyframe;
  std::vector<std::uint8_t> jpeg;
  std::string base64;
  int width = 0;
  int height = 0;
};

// Longer side scaled to max_side (bilinear, aspect kept), JPEG at
// jpeg_quality, then Base64. Throws Error{EncodeFailure}.
std::vector<PreparedImage> prepare_llm_images(std::span<const Keyframe> keyframes,
                                              std::span<const RgbImage> images, int max_side = 256,
                                              int jpeg_quality = 85);

// keyframes.json plus kf_<n>.jpg beside it.
void write_keyframe_manifest(const std::filesystem::path& dir, std::span<const PreparedImage> images);

struct ManifestEntry {
  Keyframe keyframe;
  std::filesystem::path image_path;
};
std::vector<ManifestEntry> read_keyframe_manifest(const std::filesystem::path& dir);

std::string keyframe_image_name(std::size_t n);

}  // namespace mmv
