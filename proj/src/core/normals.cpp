#include "motorseg/core.hpp"

#include <Eigen/Eigenvalues>

#include <memory>

namespace motorseg::core {

NormalEstimate estimate_normals(std::span<const Vec3> points, std::size_t k, const Vec3& viewpoint) {
  const std::size_t n = points.size();
  if (k < 3 || n <= k)
    throw SizeError("estimate_normals needs N > k >= 3 (N=" + std::to_string(n) +
                    ", k=" + std::to_string(k) + ")");

  std::unique_ptr<GridIndex> grid;
  if (n > 256)
    grid = std::make_unique<GridIndex>(points, GridIndex::suggest_cell_size(points, static_cast<double>(k) / 2.0));

  NormalEstimate out;
  out.normals.resize(n);
  out.degenerate.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const auto nb = grid ? grid->knn(points[i], k) : knn_of(points, i, k, false);
    Vec3 mean = Vec3::Zero();
    for (auto j : nb) mean += points[j];
    mean /= static_cast<double>(nb.size());
    Mat3 cov = Mat3::Zero();
    for (auto j : nb) {
      const Vec3 d = points[j] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
    const Vec3 ev = solver.eigenvalues();  // ascending
    const Vec3 to_view = viewpoint - points[i];

    const bool rank_deficient = !(ev[2] > 0.0) || ev[1] <= 1e-12 * ev[2];
    Vec3 normal;
    if (rank_deficient) {
      out.degenerate[i] = true;
      normal = to_view.norm() > 0.0 ? Vec3(to_view.normalized()) : Vec3::UnitZ();
    } else {
      normal = solver.eigenvectors().col(0).normalized();
      if (normal.dot(to_view) < 0.0) normal = -normal;
    }
    out.normals[i] = normal;
  }
  return out;
}

}  // namespace motorseg::core
