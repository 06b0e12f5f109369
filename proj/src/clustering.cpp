#include "mmv/clustering.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "mmv/error.hpp"

namespace mmv {

namespace {

void check_points(std::span<const Embedding> points) {
  if (points.empty()) throw Error(Errc::InvalidArgument, "no points to cluster");
  const auto dim = points.front().dim();
  if (dim == 0) throw Error(Errc::DimMismatch, "zero-dimensional points");
  for (const auto& p : points) {
    if (p.dim() != dim) throw Error(Errc::DimMismatch, "points differ in dimension");
    if (p.extractor_id != points.front().extractor_id) {
      throw Error(Errc::DimMismatch, "points come from different extractors");
    }
  }
}

std::size_t nearest_centroid(std::span<const double> x, const std::vector<std::vector<double>>& centroids,
                             double* best_d2) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(x, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (best_d2 != nullptr) *best_d2 = best_d;
  return best;
}

std::vector<std::vector<double>> plus_plus_seeds(std::span<const Embedding> points, int k,
                                                 std::mt19937_64& rng) {
  const std::size_t n = points.size();
  std::vector<std::vector<double>> centroids;
  centroids.reserve(static_cast<std::size_t>(k));
  auto pick_uniform = [&] {
    return std::min(n - 1, static_cast<std::size_t>(unit_interval(rng()) * static_cast<double>(n)));
  };
  centroids.push_back(points[pick_uniform()].vector);

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i].vector, centroids[0]);
  while (centroids.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (double d : d2) total += d;
    std::size_t chosen = 0;
    if (total > 0.0) {
      const double target = unit_interval(rng()) * total;
      double acc = 0.0;
      chosen = n;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
      if (chosen == n) {
        // Rounding left target beyond the last partial sum.
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            chosen = i;
            break;
          }
        }
      }
    } else {
      chosen = pick_uniform();
    }
    centroids.push_back(points[chosen].vector);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i].vector, centroids.back()));
    }
  }
  return centroids;
}

}  // namespace

void ClusteringConfig::validate() const {
  if (k_min < 2) throw Error(Errc::InvalidConfig, "k_min must be >= 2");
  if (k_min > k_max) throw Error(Errc::InvalidConfig, "k_min must not exceed k_max");
  if (!(tol > 0.0)) throw Error(Errc::InvalidConfig, "tol must be > 0");
  if (max_iters < 1) throw Error(Errc::InvalidConfig, "max_iters must be >= 1");
  if (frames_per_cluster < 1) throw Error(Errc::InvalidConfig, "frames_per_cluster must be >= 1");
  if (case_budget < 1) throw Error(Errc::InvalidConfig, "case_budget must be >= 1");
}

int ClusteringResult::populated_clusters() const {
  std::vector<bool> seen(static_cast<std::size_t>(k), false);
  for (int a : assignments) seen[static_cast<std::size_t>(a)] = true;
  return static_cast<int>(std::count(seen.begin(), seen.end(), true));
}

double unit_interval(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

ClusteringResult kmeans(std::span<const Embedding> points, int k, std::uint64_t seed, int max_iters,
                        double tol) {
  check_points(points);
  const std::size_t n = points.size();
  const std::size_t dim = points.front().dim();
  if (k < 1) throw Error(Errc::InvalidArgument, "k must be >= 1");
  if (static_cast<std::size_t>(k) > n) {
    throw Error(Errc::KTooLarge, "k=" + std::to_string(k) + " exceeds " + std::to_string(n) + " points");
  }
  if (max_iters < 1 || !(tol > 0.0)) throw Error(Errc::InvalidArgument, "max_iters >= 1 and tol > 0 required");

  std::mt19937_64 rng(seed);
  ClusteringResult result;
  result.k = k;
  result.centroids = plus_plus_seeds(points, k, rng);
  result.assignments.assign(n, 0);
  std::vector<double> d2(n, 0.0);

  auto assign_all = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      result.assignments[i] = static_cast<int>(nearest_centroid(points[i].vector, result.centroids, &d2[i]));
    }
  };

  for (int iter = 0; iter < max_iters; ++iter) {
    result.iterations = iter + 1;
    assign_all();

    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int a : result.assignments) ++sizes[static_cast<std::size_t>(a)];
    for (std::size_t c = 0; c < sizes.size(); ++c) {
      if (sizes[c] != 0) continue;
      // Re-seed at the worst-served point of a cluster that can spare one.
      std::size_t far = n;
      double far_d = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[static_cast<std::size_t>(result.assignments[i])] > 1 && d2[i] > far_d) {
          far_d = d2[i];
          far = i;
        }
      }
      if (far == n) continue;  // only duplicates left; the cluster stays empty
      --sizes[static_cast<std::size_t>(result.assignments[far])];
      result.assignments[far] = static_cast<int>(c);
      result.centroids[c] = points[far].vector;
      d2[far] = 0.0;
      sizes[c] = 1;
    }

    double inertia = 0.0;
    for (double d : d2) inertia += d;
    assert(result.inertia_trace.empty() ||
           inertia <= result.inertia_trace.back() * (1.0 + 1e-12) + 1e-12);
    result.inertia_trace.push_back(inertia);

    std::vector<std::vector<double>> sums(static_cast<std::size_t>(k), std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = sums[static_cast<std::size_t>(result.assignments[i])];
      for (std::size_t j = 0; j < dim; ++j) s[j] += points[i].vector[j];
    }
    double max_shift = 0.0;
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
      if (sizes[c] == 0) continue;
      for (double& v : sums[c]) v /= static_cast<double>(sizes[c]);
      max_shift = std::max(max_shift, euclidean_distance(sums[c], result.centroids[c]));
      result.centroids[c] = std::move(sums[c]);
    }
    if (max_shift < tol) break;
  }

  assign_all();
  result.inertia = 0.0;
  for (double d : d2) result.inertia += d;
  return result;
}

double silhouette_score(std::span<const Embedding> points, std::span<const int> assignments) {
  if (points.size() != assignments.size()) {
    throw Error(Errc::InvalidArgument, "one assignment per point required");
  }
  if (points.size() < 2) throw Error(Errc::SingleCluster, "silhouette needs at least two points");
  check_points(points);

  std::map<int, std::size_t> compact;
  for (int a : assignments) compact.emplace(a, 0);
  if (compact.size() < 2) throw Error(Errc::SingleCluster, "silhouette is undefined for one cluster");
  std::size_t next = 0;
  for (auto& [label, id] : compact) id = next++;

  const std::size_t n = points.size();
  const std::size_t m = compact.size();
  std::vector<std::size_t> label(n);
  std::vector<double> size(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    label[i] = compact[assignments[i]];
    size[label[i]] += 1.0;
  }

  // Per-point distance sums into every cluster, filled from the upper triangle.
  std::vector<double> sums(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = euclidean_distance(points[i].vector, points[j].vector);
      sums[i * m + label[j]] += d;
      sums[j * m + label[i]] += d;
    }
  }

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t own = label[i];
    if (size[own] <= 1.0) continue;  // singleton contributes 0
    const double a = sums[i * m + own] / (size[own] - 1.0);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m; ++c) {
      if (c != own) b = std::min(b, sums[i * m + c] / size[c]);
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return std::clamp(total / static_cast<double>(n), -1.0, 1.0);
}

ClusteringResult select_k(std::span<const Embedding> points, const ClusteringConfig& cfg) {
  cfg.validate();
  check_points(points);
  const std::size_t n = points.size();
  const bool all_identical = std::all_of(points.begin(), points.end(), [&](const Embedding& p) {
    return p.vector == points.front().vector;
  });
  if (n < 3 || all_identical) return kmeans(points, 1, cfg.seed, cfg.max_iters, cfg.tol);

  const int upper = std::min(cfg.k_max, static_cast<int>(n) - 1);
  std::optional<ClusteringResult> best;
  for (int k = cfg.k_min; k <= upper; ++k) {
    ClusteringResult r = kmeans(points, k, cfg.seed, cfg.max_iters, cfg.tol);
    if (r.populated_clusters() < 2) continue;
    r.silhouette = silhouette_score(points, r.assignments);
    if (!best || *r.silhouette > *best->silhouette) best = std::move(r);
  }
  if (!best) return kmeans(points, 1, cfg.seed, cfg.max_iters, cfg.tol);
  return std::move(*best);
}

}  // namespace mmv
