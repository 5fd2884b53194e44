#include "motorseg/model.hpp"

#include <cmath>
#include <limits>

namespace motorseg::model {

double cross_entropy(const Matrix& logits, std::span<const std::uint8_t> labels, std::span<const double> weights,
                     Matrix* d_logits) {
  if (labels.size() != logits.rows) throw SizeError("labels and logits differ in length");
  if (logits.rows == 0) throw SizeError("cross entropy of an empty batch");
  const std::size_t n = logits.rows, m = logits.cols;
  if (d_logits) *d_logits = Matrix(n, m);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  std::vector<double> prob(m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* z = logits.row(i);
    const std::size_t y = labels[i];
    if (y >= m) throw ValidationError("label out of range");
    const double w = weights.empty() ? 1.0 : weights[y];
    double mx = z[0];
    for (std::size_t c = 1; c < m; ++c) mx = std::max(mx, z[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      prob[c] = std::exp(z[c] - mx);
      sum += prob[c];
    }
    total += w * (std::log(sum) + mx - z[y]);
    if (d_logits) {
      double* g = d_logits->row(i);
      for (std::size_t c = 0; c < m; ++c) g[c] = w * inv_n * (prob[c] / sum - (c == y ? 1.0 : 0.0));
    }
  }
  return total * inv_n;
}

std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  for (const auto& r : cost) {
    if (r.size() != n) throw SizeError("hungarian needs a square cost matrix");
    for (double v : r)
      if (!std::isfinite(v)) throw ValidationError("hungarian needs finite costs");
  }
  if (n == 0) return {};
  // Potentials formulation, 1-based with column 0 as the virtual start.
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> result(n);
  for (std::size_t j = 1; j <= n; ++j) result[match[j] - 1] = j - 1;
  return result;
}

KernelLoss kernel_loss(const Matrix& kernels, const imbalance::KernelSet& gt, int per_category,
                       KernelMatching matching) {
  const auto k = static_cast<std::size_t>(per_category);
  const auto cats = static_cast<std::size_t>(gt.num_categories());
  if (kernels.cols != 3 || kernels.rows != cats * k) throw SizeError("kernel matrix does not match the ground truth");
  KernelLoss out;
  out.d_kernels = Matrix(kernels.rows, 3);
  std::size_t present = 0;
  for (std::size_t c = 0; c < cats; ++c) present += gt.present[c] ? 1 : 0;
  if (present == 0) return out;
  const double inv = 1.0 / static_cast<double>(present);

  for (std::size_t c = 0; c < cats; ++c) {
    if (!gt.present[c]) continue;
    const auto& target = gt.kernels[c];
    if (target.size() != k) throw SizeError("ground-truth kernel count differs from kernels per category");
    std::vector<std::vector<double>> cost(k, std::vector<double>(k));
    for (std::size_t s = 0; s < k; ++s)
      for (std::size_t t = 0; t < k; ++t) {
        double d2 = 0.0;
        for (int a = 0; a < 3; ++a) {
          const double diff = kernels(c * k + s, a) - target[t][a];
          d2 += diff * diff;
        }
        cost[s][t] = d2;
      }
    for (const auto& row : cost)
      for (double v : row)
        if (!std::isfinite(v)) {
          out.value = std::numeric_limits<double>::quiet_NaN();
          return out;
        }
    auto add_pair = [&](std::size_t s, std::size_t t, double weight) {
      out.value += weight * cost[s][t];
      for (int a = 0; a < 3; ++a) out.d_kernels(c * k + s, a) += weight * 2.0 * (kernels(c * k + s, a) - target[t][a]);
    };
    if (matching == KernelMatching::hungarian) {
      const auto assign = hungarian(cost);
      for (std::size_t s = 0; s < k; ++s) add_pair(s, assign[s], inv);
    } else {
      // symmetric Chamfer, each direction averaged over its k points
      const double w = inv * 0.5;
      for (std::size_t s = 0; s < k; ++s) {
        std::size_t best = 0;
        for (std::size_t t = 1; t < k; ++t)
          if (cost[s][t] < cost[s][best]) best = t;
        add_pair(s, best, w);
      }
      for (std::size_t t = 0; t < k; ++t) {
        std::size_t best = 0;
        for (std::size_t s = 1; s < k; ++s)
          if (cost[s][t] < cost[best][t]) best = s;
        add_pair(best, t, w);
      }
    }
  }
  return out;
}

LossResult total_loss(const ForwardResult& out, std::span<const std::uint8_t> labels, const Mat3& rotation_target,
                      const imbalance::KernelSet& kernel_gt, std::span<const double> weights, const ModelConfig& cfg) {
  LossResult r;
  r.terms.seg = cross_entropy(out.logits, labels, weights, &r.d_logits);
  r.terms.total = r.terms.seg;
  if (cfg.stn) {
    const Mat3 diff = out.rotation - rotation_target;
    r.terms.rot = diff.squaredNorm();
    r.terms.total += cfg.alpha * r.terms.rot;
    r.d_rotation = 2.0 * cfg.alpha * diff;
  }
  if (cfg.patch_branch) {
    auto kl = kernel_loss(out.kernels, kernel_gt, cfg.kernels_per_category, cfg.matching);
    r.terms.ker = kl.value;
    r.terms.total += cfg.beta * kl.value;
    for (auto& g : kl.d_kernels.data) g *= cfg.beta;
    r.d_kernels = std::move(kl.d_kernels);
  } else {
    r.d_kernels = Matrix(0, 3);
  }
  return r;
}

}  // namespace motorseg::model
