#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace motorseg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Segmentation categories. Values are the on-disk label bytes.
enum class Category : std::uint8_t {
  background = 0,
  pole_pot = 1,
  electric_connection = 2,
  gear_container = 3,
  cover = 4,
  screw = 5,
};

inline constexpr int kNumCategories = 6;
inline constexpr std::uint8_t kScrewLabel = static_cast<std::uint8_t>(Category::screw);
inline constexpr std::uint8_t kCoverLabel = static_cast<std::uint8_t>(Category::cover);
inline constexpr std::uint8_t kBackgroundLabel = 0;

const char* category_name(int label);

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested count exceeds what the input can provide.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. `offset` is the byte position where decoding failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Labeled point cloud in meters. `labels` and `normals` are either empty or
/// parallel to `points`.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<std::uint8_t> labels;
  std::vector<Vec3> normals;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_labels() const { return !labels.empty(); }
  bool has_normals() const { return !normals.empty(); }

  /// Throws ValidationError when the parallel arrays disagree, a label is
  /// out of range, or a normal is not unit length.
  void validate(int num_categories = kNumCategories) const;

  std::array<std::size_t, kNumCategories> label_histogram() const;
};

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 apply_direction(const Vec3& d) const { return rotation * d; }
  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
  }
};

Mat3 rotation_about_axis(const Vec3& axis, double angle_rad);
double deg2rad(double deg);
double rad2deg(double rad);

/// Stateless 64-bit mixer used to derive independent per-item seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace motorseg
