#include "motorseg/imbalance.hpp"

#include "motorseg/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace motorseg::imbalance {

FocusedResult focused_sampling(std::span<const Vec3> points, std::span<const std::uint8_t> labels,
                               std::uint8_t tail_label) {
  if (points.size() != labels.size()) throw ValidationError("points and labels differ in length");
  FocusedResult out;
  out.points.assign(points.begin(), points.end());
  out.labels.assign(labels.begin(), labels.end());
  std::vector<std::size_t> tail;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == tail_label) tail.push_back(i);
  if (tail.size() < 2) {
    out.warnings.push_back("tail category " + std::to_string(tail_label) + " has " + std::to_string(tail.size()) +
                           " points; focused sampling needs at least 2");
    return out;
  }
  std::vector<Vec3> tp;
  tp.reserve(tail.size());
  for (auto i : tail) tp.push_back(points[i]);
  std::vector<std::size_t> nearest(tail.size());
  for (std::size_t a = 0; a < tail.size(); ++a) nearest[a] = core::knn_of(tp, a, 1, true).front();
  for (std::size_t a = 0; a < tail.size(); ++a) {
    const std::size_t b = nearest[a];
    const bool mutual = nearest[b] == a;
    const Vec3& p1 = tp[a];
    const Vec3& p2 = tp[b];
    const double f = mutual ? 1.0 / 3.0 : 2.0 / 3.0;
    out.points.push_back(p1 + f * (p2 - p1));
    out.labels.push_back(tail_label);
    out.added_from.push_back(tail[a]);
    out.added_towards.push_back(tail[b]);
  }
  return out;
}

ClassWeights class_weights(std::span<const std::size_t> counts) {
  const std::size_t m = counts.size();
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  if (!(total > 0.0)) throw ValidationError("class weights need at least one counted point");
  ClassWeights w;
  w.ratio.assign(m, 0.0);
  w.t.assign(m, 0.0);
  w.scaled_ratio.assign(m, 0.0);
  w.weight.assign(m, 0.0);
  double max_r = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    w.ratio[i] = static_cast<double>(counts[i]) / total;
    max_r = std::max(max_r, w.ratio[i]);
  }
  double sum_t = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    if (counts[i] > 0) {
      w.t[i] = std::cbrt(max_r / w.ratio[i]);
      sum_t += w.t[i];
    }
  for (std::size_t i = 0; i < m; ++i)
    if (counts[i] > 0) {
      w.scaled_ratio[i] = w.t[i] / sum_t;
      w.factor += w.ratio[i] * w.scaled_ratio[i];
    }
  for (std::size_t i = 0; i < m; ++i)
    if (counts[i] > 0) w.weight[i] = w.scaled_ratio[i] * w.factor;
  return w;
}

KernelSet kernel_ground_truth(std::span<const Vec3> points, std::span<const std::uint8_t> labels,
                              int per_category, std::uint64_t seed, int num_categories) {
  if (points.size() != labels.size()) throw ValidationError("points and labels differ in length");
  if (per_category < 1) throw ValidationError("per_category must be >= 1");
  KernelSet ks;
  ks.per_category = per_category;
  ks.kernels.assign(num_categories, {});
  ks.indices.assign(num_categories, {});
  ks.present.assign(num_categories, false);
  const auto k = static_cast<std::size_t>(per_category);
  for (int c = 0; c < num_categories; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) members.push_back(i);
    if (members.empty()) continue;
    ks.present[c] = true;
    auto& idx = ks.indices[c];
    if (members.size() < k) {
      idx = members;
      idx.resize(k, members.front());
    } else {
      std::vector<Vec3> mp;
      mp.reserve(members.size());
      for (auto i : members) mp.push_back(points[i]);
      const auto km = core::kmeans(mp, k, mix_seed(seed + static_cast<std::uint64_t>(c)));
      for (const Vec3& centroid : km.centroids) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < mp.size(); ++j) {
          const double d = core::squared_distance(mp[j], centroid);
          if (d < best_d) {
            best_d = d;
            best = j;
          }
        }
        idx.push_back(members[best]);
      }
    }
    for (auto i : idx) ks.kernels[c].push_back(points[i]);
  }
  return ks;
}

}  // namespace motorseg::imbalance
