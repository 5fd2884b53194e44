#pragma once

// Strategies against the tiny screw share: tail densification, cube-root
// class weights and per-category kernel points.

#include "motorseg/common.hpp"

#include <span>
#include <string>
#include <vector>

namespace motorseg::imbalance {

struct FocusedResult {
  std::vector<Vec3> points;  ///< input points followed by the added ones
  std::vector<std::uint8_t> labels;
  /// For each added point, the input index of its p1 and p2.
  std::vector<std::size_t> added_from, added_towards;
  std::vector<std::string> warnings;
};

/// Adds one point per tail point p1 on the segment to its nearest same-label
/// point p2: at 1/3 when the pair is mutually nearest, at 2/3 otherwise.
/// Added points are appended after the unchanged input.
FocusedResult focused_sampling(std::span<const Vec3> points, std::span<const std::uint8_t> labels,
                               std::uint8_t tail_label);

struct ClassWeights {
  std::vector<double> ratio;         ///< r_i
  std::vector<double> t;             ///< (max r / r_i)^(1/3)
  std::vector<double> scaled_ratio;  ///< t_i / sum t
  double factor = 0.0;               ///< sum r_i sr_i
  std::vector<double> weight;        ///< sr_i * factor; 0 for absent categories
};

/// Throws ValidationError when every count is zero.
ClassWeights class_weights(std::span<const std::size_t> counts);

struct KernelSet {
  int per_category = 8;
  std::vector<std::vector<Vec3>> kernels;           ///< [category][slot]
  std::vector<std::vector<std::size_t>> indices;    ///< source point per slot
  std::vector<bool> present;

  int num_categories() const { return static_cast<int>(kernels.size()); }
};

/// K-means (k = per_category) per category, each centroid snapped to its
/// nearest member (ties to the lower index). Smaller categories use their
/// points padded by repeating the first; empty categories are absent.
KernelSet kernel_ground_truth(std::span<const Vec3> points, std::span<const std::uint8_t> labels,
                              int per_category, std::uint64_t seed, int num_categories = kNumCategories);

}  // namespace motorseg::imbalance
