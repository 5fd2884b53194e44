#pragma once

// Geometric and clustering primitives. All functions are pure given their
// inputs and explicit seed.

#include "motorseg/common.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace motorseg::core {

/// Squared Euclidean distance, evaluated in a fixed order so every search
/// path produces identical values.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

/// k nearest neighbours of `query`, ascending by Euclidean distance with ties
/// broken by lower index. With `exclude_self`, the lowest-index point lying
/// exactly on `query` is skipped. Throws SizeError when k exceeds the number of
/// candidates.
std::vector<std::size_t> knn(std::span<const Vec3> points, const Vec3& query, std::size_t k,
                             bool exclude_self);

/// Same ordering contract as knn(), but the excluded point is named by index.
std::vector<std::size_t> knn_of(std::span<const Vec3> points, std::size_t index, std::size_t k,
                                bool exclude_self);

/// Indices within `radius` (closed ball) of `query`, ascending by index.
std::vector<std::size_t> radius_search(std::span<const Vec3> points, const Vec3& query,
                                       double radius);

/// Uniform grid accelerator. Produces neighbour sets bit-identical to the
/// brute-force functions above, including tie-breaking.
class GridIndex {
 public:
  GridIndex(std::span<const Vec3> points, double cell_size);

  std::vector<std::size_t> knn(const Vec3& query, std::size_t k,
                               std::optional<std::size_t> exclude = std::nullopt) const;
  std::vector<std::size_t> radius(const Vec3& query, double radius) const;

  double cell_size() const { return cell_; }

  /// Calls f(index) for every point within `radius` of `query`, in no particular order.
  template <class F>
  void visit_radius(const Vec3& query, double radius, F&& f) const {
    const double r2 = radius * radius;
    const auto lo = cell_of(query - Vec3::Constant(radius));
    const auto hi = cell_of(query + Vec3::Constant(radius));
    for (std::int64_t x = std::max<std::int64_t>(lo[0], 0); x <= std::min(hi[0], dims_[0] - 1); ++x)
      for (std::int64_t y = std::max<std::int64_t>(lo[1], 0); y <= std::min(hi[1], dims_[1] - 1); ++y)
        for (std::int64_t z = std::max<std::int64_t>(lo[2], 0); z <= std::min(hi[2], dims_[2] - 1); ++z) {
          const std::size_t c = flat(x, y, z);
          for (std::uint32_t s = cell_start_[c]; s < cell_start_[c + 1]; ++s) {
            const std::size_t i = sorted_[s];
            if (squared_distance(points_[i], query) <= r2) f(i);
          }
        }
  }

  /// Cell size that puts roughly `target_per_cell` points in each occupied cell.
  static double suggest_cell_size(std::span<const Vec3> points, double target_per_cell = 8.0);

 private:
  std::array<std::int64_t, 3> cell_of(const Vec3& p) const;
  std::size_t flat(std::int64_t x, std::int64_t y, std::int64_t z) const;

  std::span<const Vec3> points_;
  double cell_;
  Vec3 origin_;
  std::array<std::int64_t, 3> dims_{};
  std::vector<std::uint32_t> cell_start_;
  std::vector<std::uint32_t> sorted_;
};

struct KMeansResult {
  std::vector<Vec3> centroids;
  std::vector<int> assignment;
  double objective = 0.0;  ///< sum of squared distances to assigned centroid
  int iterations = 0;
  /// Objective after each Lloyd iteration of the returned run.
  std::vector<double> objective_history;
};

struct KMeansOptions {
  int max_iterations = 100;
  /// Independent seedings; the lowest-objective run is returned.
  int restarts = 16;
};

/// Lloyd's algorithm. The first run seeds with a uniform first centre followed
/// by farthest-point picks; further restarts use D^2-weighted picks. A cluster
/// that loses all its points is re-seeded at the point farthest from its
/// nearest centroid.
KMeansResult kmeans(std::span<const Vec3> points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

/// Per-item cluster id; -1 is noise. Ids are contiguous from 0.
struct ClusterLabels {
  std::vector<int> assignment;
  int num_clusters = 0;

  std::size_t noise_count() const;
  std::vector<std::size_t> cluster_sizes() const;
};

/// DBSCAN. A point is core when at least `min_pts` points (itself included)
/// lie within `eps`. Clusters are numbered in order of their lowest-index
/// core point. A border point joins the cluster of its nearest core
/// neighbour (ties to the lower index), which makes the partition independent
/// of input order.
ClusterLabels dbscan(std::span<const Vec3> items, double eps, std::size_t min_pts);

struct NormalEstimate {
  std::vector<Vec3> normals;
  /// True where the neighbourhood had rank < 2; the normal then points at the viewpoint.
  std::vector<bool> degenerate;
};

/// PCA normals over the k-neighbourhood (point included), oriented so that
/// dot(n, viewpoint - p) >= 0.
NormalEstimate estimate_normals(std::span<const Vec3> points, std::size_t k, const Vec3& viewpoint);

}  // namespace motorseg::core
