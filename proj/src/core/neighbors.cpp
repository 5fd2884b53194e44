#include "motorseg/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace motorseg::core {
namespace {

using Candidate = std::pair<double, std::size_t>;

void take_k_smallest(std::vector<Candidate>& c, std::size_t k) {
  // pair ordering is (distance, index): exactly the tie rule
  if (k < c.size()) {
    std::nth_element(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(k), c.end());
    c.resize(k);
  }
  std::sort(c.begin(), c.end());
}

std::vector<std::size_t> indices_of(const std::vector<Candidate>& c) {
  std::vector<std::size_t> out;
  out.reserve(c.size());
  for (const auto& e : c) out.push_back(e.second);
  return out;
}

std::vector<std::size_t> knn_brute(std::span<const Vec3> points, const Vec3& query, std::size_t k,
                                   std::optional<std::size_t> exclude) {
  std::vector<Candidate> c;
  c.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (exclude && *exclude == i) continue;
    c.emplace_back(squared_distance(points[i], query), i);
  }
  take_k_smallest(c, k);
  return indices_of(c);
}

std::optional<std::size_t> first_coincident(std::span<const Vec3> points, const Vec3& query) {
  for (std::size_t i = 0; i < points.size(); ++i)
    if (squared_distance(points[i], query) == 0.0) return i;
  return std::nullopt;
}

void check_k(std::size_t n, std::size_t k, bool exclude_self) {
  if (n == 0) throw SizeError("knn on an empty point set");
  const std::size_t avail = exclude_self ? n - 1 : n;
  if (k > avail)
    throw SizeError("knn: k=" + std::to_string(k) + " exceeds " + std::to_string(avail) +
                    " available neighbours");
}

}  // namespace

std::vector<std::size_t> knn(std::span<const Vec3> points, const Vec3& query, std::size_t k,
                             bool exclude_self) {
  check_k(points.size(), k, exclude_self);
  std::optional<std::size_t> exclude;
  if (exclude_self) exclude = first_coincident(points, query);
  return knn_brute(points, query, k, exclude);
}

std::vector<std::size_t> knn_of(std::span<const Vec3> points, std::size_t index, std::size_t k,
                                bool exclude_self) {
  check_k(points.size(), k, exclude_self);
  if (index >= points.size()) throw SizeError("knn_of: index out of range");
  return knn_brute(points, points[index], k,
                   exclude_self ? std::optional<std::size_t>(index) : std::nullopt);
}

std::vector<std::size_t> radius_search(std::span<const Vec3> points, const Vec3& query,
                                       double radius) {
  std::vector<std::size_t> out;
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (squared_distance(points[i], query) <= r2) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------------------

GridIndex::GridIndex(std::span<const Vec3> points, double cell_size)
    : points_(points), cell_(cell_size) {
  if (!(cell_size > 0.0)) throw ValidationError("GridIndex: cell size must be positive");
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  if (points.empty()) lo = hi = Vec3::Zero();
  // Keep the cell count bounded for sparse, elongated sets.
  const double max_cells = 8.0 * static_cast<double>(points.size()) + 64.0;
  for (;;) {
    double total = 1.0;
    for (int a = 0; a < 3; ++a) total *= std::floor((hi[a] - lo[a]) / cell_) + 1.0;
    if (total <= max_cells) break;
    cell_ *= 1.5;
  }
  origin_ = lo;
  for (int a = 0; a < 3; ++a)
    dims_[a] = static_cast<std::int64_t>(std::floor((hi[a] - lo[a]) / cell_)) + 1;

  const std::size_t ncell = static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]);
  cell_start_.assign(ncell + 1, 0);
  std::vector<std::uint32_t> cell_id(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto c = cell_of(points[i]);
    for (int a = 0; a < 3; ++a) c[a] = std::clamp<std::int64_t>(c[a], 0, dims_[a] - 1);
    cell_id[i] = static_cast<std::uint32_t>(flat(c[0], c[1], c[2]));
    ++cell_start_[cell_id[i] + 1];
  }
  for (std::size_t c = 0; c < ncell; ++c) cell_start_[c + 1] += cell_start_[c];
  sorted_.resize(points.size());
  std::vector<std::uint32_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < points.size(); ++i)
    sorted_[fill[cell_id[i]]++] = static_cast<std::uint32_t>(i);
}

std::array<std::int64_t, 3> GridIndex::cell_of(const Vec3& p) const {
  std::array<std::int64_t, 3> c{};
  for (int a = 0; a < 3; ++a) {
    const double v = std::floor((p[a] - origin_[a]) / cell_);
    // saturate far-away queries instead of overflowing
    c[a] = static_cast<std::int64_t>(std::clamp(v, -1e15, 1e15));
  }
  return c;
}

std::size_t GridIndex::flat(std::int64_t x, std::int64_t y, std::int64_t z) const {
  return static_cast<std::size_t>((x * dims_[1] + y) * dims_[2] + z);
}

std::vector<std::size_t> GridIndex::knn(const Vec3& query, std::size_t k,
                                        std::optional<std::size_t> exclude) const {
  const std::size_t avail = points_.size() - (exclude && *exclude < points_.size() ? 1 : 0);
  if (points_.empty()) throw SizeError("knn on an empty point set");
  if (k > avail)
    throw SizeError("knn: k=" + std::to_string(k) + " exceeds " + std::to_string(avail) +
                    " available neighbours");
  if (k == 0) return {};

  const auto qc = cell_of(query);
  for (int a = 0; a < 3; ++a)
    if (qc[a] < -2 || qc[a] > dims_[a] + 1) return knn_brute(points_, query, k, exclude);
  std::vector<Candidate> cand;
  const double margin = 1e-7 * cell_;

  auto visit_cell = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
    if (x < 0 || y < 0 || z < 0 || x >= dims_[0] || y >= dims_[1] || z >= dims_[2]) return;
    const std::size_t c = flat(x, y, z);
    for (std::uint32_t s = cell_start_[c]; s < cell_start_[c + 1]; ++s) {
      const std::size_t i = sorted_[s];
      if (exclude && *exclude == i) continue;
      cand.emplace_back(squared_distance(points_[i], query), i);
    }
  };

  for (std::int64_t r = 0;; ++r) {
    // shell of Chebyshev radius r around qc
    for (std::int64_t x = qc[0] - r; x <= qc[0] + r; ++x)
      for (std::int64_t y = qc[1] - r; y <= qc[1] + r; ++y) {
        const bool edge = (x == qc[0] - r || x == qc[0] + r || y == qc[1] - r || y == qc[1] + r);
        if (edge) {
          for (std::int64_t z = qc[2] - r; z <= qc[2] + r; ++z) visit_cell(x, y, z);
        } else {
          visit_cell(x, y, qc[2] - r);
          if (r > 0) visit_cell(x, y, qc[2] + r);
        }
      }

    bool covers_all = true;
    double bound = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (qc[a] - r > 0 || qc[a] + r < dims_[a] - 1) covers_all = false;
      const double lo = origin_[a] + static_cast<double>(qc[a] - r) * cell_;
      const double hi = origin_[a] + static_cast<double>(qc[a] + r + 1) * cell_;
      bound = std::min({bound, query[a] - lo, hi - query[a]});
    }
    if (covers_all) break;
    if (cand.size() >= k) {
      std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k - 1), cand.end());
      const double kth = cand[k - 1].first;
      const double safe = bound - margin;
      if (safe > 0.0 && kth < safe * safe) break;
    }
  }
  take_k_smallest(cand, k);
  return indices_of(cand);
}

std::vector<std::size_t> GridIndex::radius(const Vec3& query, double radius) const {
  std::vector<std::size_t> out;
  visit_radius(query, radius, [&](std::size_t i) { out.push_back(i); });
  std::sort(out.begin(), out.end());
  return out;
}

double GridIndex::suggest_cell_size(std::span<const Vec3> points, double target_per_cell) {
  if (points.size() < 2) return 1.0;
  Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  Vec3 ext = (hi - lo).cwiseMax(1e-9);
  std::sort(ext.data(), ext.data() + 3);
  // Point clouds here are surface samples: size cells from the two largest extents.
  const double area = ext[1] * ext[2];
  return std::max(std::sqrt(area * target_per_cell / static_cast<double>(points.size())), 1e-9);
}

}  // namespace motorseg::core
