#pragma once

// Quad-precision evaluation of the cube-root class weighting, written
// directly from the formulas without sharing code with the library.

#include <quadmath.h>

#include <cstddef>
#include <vector>

namespace oracle {

struct QuadWeights {
  std::vector<__float128> ratio, t, scaled_ratio, weight;
  __float128 factor = 0;
};

inline QuadWeights quad_class_weights(const std::vector<std::size_t>& counts) {
  QuadWeights w;
  const std::size_t m = counts.size();
  __float128 total = 0;
  for (auto c : counts) total += static_cast<__float128>(c);
  w.ratio.resize(m);
  w.t.assign(m, 0);
  w.scaled_ratio.assign(m, 0);
  w.weight.assign(m, 0);
  __float128 max_r = 0;
  for (std::size_t i = 0; i < m; ++i) {
    w.ratio[i] = static_cast<__float128>(counts[i]) / total;
    if (w.ratio[i] > max_r) max_r = w.ratio[i];
  }
  __float128 sum_t = 0;
  for (std::size_t i = 0; i < m; ++i)
    if (counts[i] > 0) {
      w.t[i] = cbrtq(max_r / w.ratio[i]);
      sum_t += w.t[i];
    }
  for (std::size_t i = 0; i < m; ++i)
    if (counts[i] > 0) w.scaled_ratio[i] = w.t[i] / sum_t;
  for (std::size_t i = 0; i < m; ++i) w.factor += w.ratio[i] * w.scaled_ratio[i];
  for (std::size_t i = 0; i < m; ++i) w.weight[i] = w.scaled_ratio[i] * w.factor;
  return w;
}

inline double rel_error(double got, __float128 want) {
  const __float128 diff = static_cast<__float128>(got) - want;
  const __float128 denom = want < 0 ? -want : want;
  const __float128 ad = diff < 0 ? -diff : diff;
  return denom == 0 ? static_cast<double>(ad) : static_cast<double>(ad / denom);
}

}  // namespace oracle
