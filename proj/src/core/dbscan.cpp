#include "motorseg/core.hpp"

#include <deque>
#include <limits>
#include <memory>

namespace motorseg::core {

std::size_t ClusterLabels::noise_count() const {
  std::size_t n = 0;
  for (int a : assignment) n += (a < 0);
  return n;
}

std::vector<std::size_t> ClusterLabels::cluster_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(num_clusters), 0);
  for (int a : assignment)
    if (a >= 0) ++sizes[static_cast<std::size_t>(a)];
  return sizes;
}

ClusterLabels dbscan(std::span<const Vec3> items, double eps, std::size_t min_pts) {
  if (!(eps > 0.0)) throw ValidationError("dbscan: eps must be positive");
  if (min_pts < 1) throw ValidationError("dbscan: min_pts must be >= 1");
  ClusterLabels out;
  const std::size_t n = items.size();
  out.assignment.assign(n, -1);
  if (n == 0) return out;

  std::unique_ptr<GridIndex> grid;
  if (n > 64) grid = std::make_unique<GridIndex>(items, eps);
  auto visit = [&](std::size_t i, auto&& f) {
    if (grid) {
      grid->visit_radius(items[i], eps, f);
    } else {
      const double r2 = eps * eps;
      for (std::size_t j = 0; j < n; ++j)
        if (squared_distance(items[i], items[j]) <= r2) f(j);
    }
  };

  std::vector<bool> core(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t count = 0;
    visit(i, [&](std::size_t) { ++count; });
    core[i] = count >= min_pts;
  }

  // Core points: connected components of the eps-graph.
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || out.assignment[i] >= 0) continue;
    const int id = out.num_clusters++;
    out.assignment[i] = id;
    queue.push_back(i);
    while (!queue.empty()) {
      const std::size_t c = queue.front();
      queue.pop_front();
      visit(c, [&](std::size_t j) {
        if (core[j] && out.assignment[j] < 0) {
          out.assignment[j] = id;
          queue.push_back(j);
        }
      });
    }
  }

  // Border points join their nearest core neighbour's cluster.
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    double best_d = std::numeric_limits<double>::infinity();
    std::size_t best = n;
    visit(i, [&](std::size_t j) {
      if (!core[j]) return;
      const double d = squared_distance(items[i], items[j]);
      if (d < best_d || (d == best_d && j < best)) {
        best_d = d;
        best = j;
      }
    });
    if (best < n) out.assignment[i] = out.assignment[best];
  }
  return out;
}

}  // namespace motorseg::core
