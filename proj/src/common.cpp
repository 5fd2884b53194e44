#include "motorseg/common.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

namespace motorseg {

const char* category_name(int label) {
  switch (label) {
    case 0: return "background";
    case 1: return "pole_pot";
    case 2: return "electric_connection";
    case 3: return "gear_container";
    case 4: return "cover";
    case 5: return "screw";
    default: return "unknown";
  }
}

void PointCloud::validate(int num_categories) const {
  if (!labels.empty() && labels.size() != points.size())
    throw ValidationError("label count " + std::to_string(labels.size()) +
                          " does not match point count " + std::to_string(points.size()));
  if (!normals.empty() && normals.size() != points.size())
    throw ValidationError("normal count " + std::to_string(normals.size()) +
                          " does not match point count " + std::to_string(points.size()));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= num_categories)
      throw ValidationError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                            " out of range");
  for (std::size_t i = 0; i < normals.size(); ++i)
    if (std::abs(normals[i].norm() - 1.0) > 1e-6)
      throw ValidationError("normal at index " + std::to_string(i) + " is not unit length");
}

std::array<std::size_t, kNumCategories> PointCloud::label_histogram() const {
  std::array<std::size_t, kNumCategories> h{};
  for (auto l : labels)
    if (l < kNumCategories) ++h[l];
  return h;
}

Mat3 rotation_about_axis(const Vec3& axis, double angle_rad) {
  return Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
}

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

std::uint64_t mix_seed(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace motorseg
