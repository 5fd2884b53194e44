#pragma once

// Cuboid sample-region restriction, sub-cloud splitting and the
// pre-processing augmentations (aug1 rotation and jitter, aug2 cuboid size).

#include "motorseg/common.hpp"
#include "motorseg/json_io.hpp"

#include "json.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace motorseg::preprocess {

struct CuboidConfig {
  Vec3 center{0.0, 0.0, 0.0575};
  Vec3 half_extents{0.13, 0.075, 0.0425};
  /// aug2: per-axis multiplier drawn uniformly from [lo, hi] when enabled.
  double size_jitter_lo = 0.85;
  double size_jitter_hi = 1.25;
  bool jitter_size = false;

  void validate() const;
};

struct AugConfig {
  bool aug1 = true;  ///< random rotation and jitter of the cuboid cloud
  bool aug2 = true;  ///< random cuboid size
  bool aug3 = true;  ///< generation-time motor pose jitter
  bool aug4 = true;  ///< generation-time hovering tiles
  double yaw_lo_deg = 0.0;
  double yaw_hi_deg = 360.0;
  double tilt_deg = 15.0;       ///< tilt about x and y, uniform in [-tilt, tilt]
  double jitter_sigma = 0.0015;  ///< metres
  double jitter_clip = 0.0075;   ///< metres, per coordinate

  void validate() const;
};

struct CropResult {
  PointCloud cuboid;
  std::vector<std::size_t> source_indices;  ///< into the input cloud
  std::size_t outside_count = 0;
  Vec3 half_extents_used = Vec3::Zero();
};

/// Points inside the closed axis-aligned cuboid. Throws ValidationError when
/// the input or the resulting cuboid is empty.
CropResult crop_cuboid(const PointCloud& cloud, const CuboidConfig& cfg, std::uint64_t seed);

struct Aug1Result {
  PointCloud cloud;
  Mat3 rotation_gt = Mat3::Identity();
  double yaw_deg = 0.0, tilt_x_deg = 0.0, tilt_y_deg = 0.0;
};

/// Rotates about `center` by Rz(yaw) Ry(tilt_y) Rx(tilt_x) and adds clipped
/// Gaussian jitter per coordinate. With aug1 disabled the cloud is returned
/// unchanged with an identity rotation.
Aug1Result augment_aug1(const PointCloud& cloud, const AugConfig& cfg, const Vec3& center,
                        std::uint64_t seed);

struct Normalization {
  Vec3 offset = Vec3::Zero();
  double scale = 1.0;
  bool degenerate = false;  ///< all points coincided; scale was clamped

  Vec3 apply(const Vec3& p) const { return (p - offset) / scale; }
  Vec3 invert(const Vec3& q) const { return q * scale + offset; }
};

inline constexpr double kMinNormalizationScale = 1e-12;

/// Centroid offset and max-distance scale, so the result lies in the unit ball.
Normalization fit_normalization(std::span<const Vec3> points);
std::vector<Vec3> normalize(std::span<const Vec3> points, Normalization& out);

enum class SplitMode { train, test };

struct SubCloud {
  std::vector<Vec3> points;
  std::vector<std::uint8_t> labels;
  std::vector<std::size_t> source_indices;  ///< into the cuboid cloud
  Mat3 rotation_gt = Mat3::Identity();
  Normalization normalization;
  std::size_t padded = 0;  ///< trailing resampled points (test mode)

  std::size_t size() const { return points.size(); }
};

struct SplitResult {
  std::vector<SubCloud> subclouds;
  std::size_t discarded = 0;
  std::vector<std::string> warnings;
};

/// Shuffles the cuboid by `seed` and cuts consecutive chunks of S points.
/// Train mode drops the trailing partial chunk; test mode pads it with points
/// drawn uniformly with replacement from the whole cuboid.
SplitResult split_subclouds(const PointCloud& cuboid, std::size_t S, SplitMode mode, std::uint64_t seed,
                            const Mat3& rotation_gt = Mat3::Identity(), bool normalize_points = true);

/// Everything needed to reproduce one cuboid's preprocessing.
struct PreprocessRecord {
  std::uint64_t seed = 0;
  std::size_t raw_count = 0;
  std::size_t cuboid_count = 0;
  std::size_t outside_count = 0;
  Vec3 cuboid_center = Vec3::Zero();
  Vec3 half_extents_used = Vec3::Zero();
  bool aug1 = false, aug2 = false;
  double yaw_deg = 0.0, tilt_x_deg = 0.0, tilt_y_deg = 0.0;
  double jitter_sigma = 0.0, jitter_clip = 0.0;
  Mat3 rotation_gt = Mat3::Identity();
};

// Missing keys keep their defaults.
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CuboidConfig, center, half_extents, size_jitter_lo, size_jitter_hi,
                                                jitter_size)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AugConfig, aug1, aug2, aug3, aug4, yaw_lo_deg, yaw_hi_deg, tilt_deg,
                                                jitter_sigma, jitter_clip)

void to_json(nlohmann::json& j, const PreprocessRecord& r);
void from_json(const nlohmann::json& j, PreprocessRecord& r);

struct PreparedCuboid {
  CropResult crop;
  PointCloud augmented;  ///< cuboid after aug1 (identical to crop.cuboid when off)
  PreprocessRecord record;
};

/// crop_cuboid followed by aug1. Augmentations run only in train mode.
PreparedCuboid prepare_cuboid(const PointCloud& raw, const CuboidConfig& cuboid, const AugConfig& aug,
                              SplitMode mode, std::uint64_t seed);

SplitMode parse_split_mode(const std::string& s);

}  // namespace motorseg::preprocess
