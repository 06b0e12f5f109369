#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mmv/model.hpp"

namespace mmv {

struct ClusteringConfig {
  int k_min = 2;
  int k_max = 8;
  std::uint64_t seed = 0;
  int max_iters = 100;
  double tol = 1e-6;
  int frames_per_cluster = 1;
  int case_budget = 10;

  // Throws Error{InvalidConfig}.
  void validate() const;
};

struct ClusteringResult {
  int k = 0;
  std::vector<int> assignments;
  std::vector<std::vector<double>> centroids;
  double inertia = 0.0;
  std::optional<double> silhouette;  // absent for k == 1
  int iterations = 0;
  // Inertia after each assignment step; non-increasing.
  std::vector<double> inertia_trace;

  // Number of clusters that received at least one point.
  int populated_clusters() const;
};

double squared_distance(std::span<const double> a, std::span<const double> b);
double euclidean_distance(std::span<const double> a, std::span<const double> b);

// k-means++ seeding from `seed`, then Lloyd iterations until the largest
// centroid move is below tol or max_iters is reached. An emptied cluster is
// re-seeded at the point farthest from its centroid. On return every point is
// assigned to its nearest centroid (lowest index on ties).
// Throws Error{KTooLarge | DimMismatch | InvalidArgument}.
ClusteringResult kmeans(std::span<const Embedding> points, int k, std::uint64_t seed, int max_iters,
                        double tol);

// Mean silhouette with Euclidean distance; members of singleton clusters
// score 0. Labels may be any integers. Throws Error{SingleCluster} when fewer
// than two distinct labels are present.
double silhouette_score(std::span<const Embedding> points, std::span<const int> assignments);

// Sweeps k over [k_min, min(k_max, n-1)] and keeps the best silhouette,
// preferring the smaller k on ties. Fewer than three points, or points that
// are all identical, give a single cluster.
ClusteringResult select_k(std::span<const Embedding> points, const ClusteringConfig& cfg);

// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
double unit_interval(std::uint64_t bits);

}  // namespace mmv
