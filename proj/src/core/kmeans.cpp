#include "motorseg/core.hpp"

#include <limits>
#include <random>

namespace motorseg::core {
namespace {

std::vector<Vec3> farthest_point_seeds(std::span<const Vec3> points, std::size_t k,
                                       std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  std::vector<Vec3> seeds;
  seeds.reserve(k);
  seeds.push_back(points[pick(rng)]);
  std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
  while (seeds.size() < k) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points[i], seeds.back()));
      if (nearest[i] > best_d) {
        best_d = nearest[i];
        best = i;
      }
    }
    seeds.push_back(points[best]);
  }
  return seeds;
}

// D^2-weighted picks after a uniform first pick.
std::vector<Vec3> d2_weighted_seeds(std::span<const Vec3> points, std::size_t k,
                                    std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  std::vector<Vec3> seeds;
  seeds.reserve(k);
  seeds.push_back(points[pick(rng)]);
  std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
  while (seeds.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points[i], seeds.back()));
      total += nearest[i];
    }
    if (!(total > 0.0)) {
      seeds.push_back(points[pick(rng)]);
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng);
    std::size_t chosen = points.size() - 1;
    for (std::size_t i = 0; i < points.size(); ++i) {
      target -= nearest[i];
      if (target < 0.0) {
        chosen = i;
        break;
      }
    }
    seeds.push_back(points[chosen]);
  }
  return seeds;
}

int nearest_centroid(const Vec3& p, const std::vector<Vec3>& centroids, double* d2_out) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (d2_out) *d2_out = best_d;
  return best;
}

double objective_of(std::span<const Vec3> points, const std::vector<Vec3>& centroids,
                    const std::vector<int>& assignment) {
  double obj = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    obj += squared_distance(points[i], centroids[static_cast<std::size_t>(assignment[i])]);
  return obj;
}

KMeansResult lloyd(std::span<const Vec3> points, std::vector<Vec3> centroids, int max_iterations) {
  const std::size_t n = points.size();
  const std::size_t k = centroids.size();
  KMeansResult res;
  res.assignment.assign(n, -1);

  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int c = nearest_centroid(points[i], centroids, nullptr);
      if (c != res.assignment[i]) {
        res.assignment[i] = c;
        changed = true;
      }
    }
    if (!changed) break;
    res.iterations = iter + 1;

    std::vector<Vec3> sum(k, Vec3::Zero());
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[static_cast<std::size_t>(res.assignment[i])] += points[i];
      ++count[static_cast<std::size_t>(res.assignment[i])];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (count[c] > 0) centroids[c] = sum[c] / static_cast<double>(count[c]);
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] > 0) continue;
      // re-seed an emptied cluster at the worst-served point
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        double d;
        nearest_centroid(points[i], centroids, &d);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      centroids[c] = points[far];
    }
    res.objective_history.push_back(objective_of(points, centroids, res.assignment));
  }
  res.centroids = std::move(centroids);
  res.objective = objective_of(points, res.centroids, res.assignment);
  return res;
}

}  // namespace

KMeansResult kmeans(std::span<const Vec3> points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
  if (points.empty()) throw SizeError("kmeans on an empty point set");
  if (k < 1 || k > points.size())
    throw SizeError("kmeans: k=" + std::to_string(k) + " invalid for " +
                    std::to_string(points.size()) + " points");
  KMeansResult best;
  bool have = false;
  for (int r = 0; r < std::max(options.restarts, 1); ++r) {
    std::mt19937_64 rng(mix_seed(seed + static_cast<std::uint64_t>(r) * 0x9e37ULL));
    auto seeds = r == 0 ? farthest_point_seeds(points, k, rng) : d2_weighted_seeds(points, k, rng);
    auto res = lloyd(points, std::move(seeds), options.max_iterations);
    if (!have || res.objective < best.objective) {
      best = std::move(res);
      have = true;
    }
  }
  return best;
}

}  // namespace motorseg::core
