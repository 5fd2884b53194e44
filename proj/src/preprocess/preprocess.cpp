#include "motorseg/preprocess.hpp"

#include "motorseg/json_io.hpp"
#include "motorseg/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace motorseg::preprocess {

void CuboidConfig::validate() const {
  if (!(half_extents.array() > 0.0).all()) throw ValidationError("cuboid half extents must be > 0");
  if (!(size_jitter_lo >= 0.5 && size_jitter_hi <= 2.0 && size_jitter_lo <= size_jitter_hi))
    throw ValidationError("cuboid size jitter must satisfy 0.5 <= lo <= hi <= 2.0");
}

void AugConfig::validate() const {
  if (!(jitter_sigma >= 0.0 && jitter_clip >= jitter_sigma))
    throw ValidationError("aug1 jitter requires jitter_clip >= jitter_sigma >= 0");
  if (!(yaw_lo_deg <= yaw_hi_deg)) throw ValidationError("aug1 yaw range has lo > hi");
  if (!(tilt_deg >= 0.0)) throw ValidationError("aug1 tilt must be >= 0");
}

CropResult crop_cuboid(const PointCloud& cloud, const CuboidConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cloud.empty()) throw ValidationError("cannot crop an empty cloud");
  CropResult out;
  Vec3 half = cfg.half_extents;
  if (cfg.jitter_size) {
    Rng rng(seed);
    for (int k = 0; k < 3; ++k) half[k] *= rng.uniform(cfg.size_jitter_lo, cfg.size_jitter_hi);
  }
  out.half_extents_used = half;
  const Vec3 lo = cfg.center - half, hi = cfg.center + half;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    if ((p.array() >= lo.array()).all() && (p.array() <= hi.array()).all()) {
      out.cuboid.points.push_back(p);
      if (cloud.has_labels()) out.cuboid.labels.push_back(cloud.labels[i]);
      if (cloud.has_normals()) out.cuboid.normals.push_back(cloud.normals[i]);
      out.source_indices.push_back(i);
    } else {
      ++out.outside_count;
    }
  }
  if (out.cuboid.empty()) {
    std::ostringstream msg;
    msg << "cuboid is empty (centre " << cfg.center.transpose() << ", half extents " << half.transpose() << ")";
    throw ValidationError(msg.str());
  }
  return out;
}

Aug1Result augment_aug1(const PointCloud& cloud, const AugConfig& cfg, const Vec3& center, std::uint64_t seed) {
  cfg.validate();
  Aug1Result out;
  out.cloud = cloud;
  if (!cfg.aug1) return out;
  Rng rng(seed);
  out.yaw_deg = rng.uniform(cfg.yaw_lo_deg, cfg.yaw_hi_deg);
  out.tilt_x_deg = rng.uniform(-cfg.tilt_deg, cfg.tilt_deg);
  out.tilt_y_deg = rng.uniform(-cfg.tilt_deg, cfg.tilt_deg);
  const Mat3 R = rotation_about_axis(Vec3::UnitZ(), deg2rad(out.yaw_deg)) *
                 rotation_about_axis(Vec3::UnitY(), deg2rad(out.tilt_y_deg)) *
                 rotation_about_axis(Vec3::UnitX(), deg2rad(out.tilt_x_deg));
  out.rotation_gt = R;
  for (auto& p : out.cloud.points) {
    p = center + R * (p - center);
    if (cfg.jitter_sigma > 0.0)
      for (int k = 0; k < 3; ++k) p[k] += std::clamp(rng.normal(cfg.jitter_sigma), -cfg.jitter_clip, cfg.jitter_clip);
  }
  for (auto& n : out.cloud.normals) n = R * n;
  return out;
}

Normalization fit_normalization(std::span<const Vec3> points) {
  if (points.empty()) throw ValidationError("cannot normalize an empty point set");
  Normalization n;
  Vec3 sum = Vec3::Zero();
  for (const auto& p : points) sum += p;
  n.offset = sum / static_cast<double>(points.size());
  double r2 = 0.0;
  for (const auto& p : points) r2 = std::max(r2, (p - n.offset).squaredNorm());
  n.scale = std::sqrt(r2);
  if (!(n.scale > kMinNormalizationScale)) {
    n.scale = kMinNormalizationScale;
    n.degenerate = true;
  }
  return n;
}

std::vector<Vec3> normalize(std::span<const Vec3> points, Normalization& out) {
  out = fit_normalization(points);
  std::vector<Vec3> q;
  q.reserve(points.size());
  for (const auto& p : points) q.push_back(out.apply(p));
  return q;
}

SplitResult split_subclouds(const PointCloud& cuboid, std::size_t S, SplitMode mode, std::uint64_t seed,
                            const Mat3& rotation_gt, bool normalize_points) {
  if (cuboid.empty()) throw ValidationError("cannot split an empty cuboid cloud");
  if (S == 0) throw ValidationError("sub-cloud size must be >= 1");
  SplitResult out;
  const std::size_t n = cuboid.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng.engine());

  const std::size_t full = n / S, rest = n % S;
  std::vector<std::vector<std::size_t>> chunks;
  for (std::size_t c = 0; c < full; ++c) chunks.emplace_back(order.begin() + c * S, order.begin() + (c + 1) * S);
  std::size_t padded = 0;
  if (rest > 0) {
    if (mode == SplitMode::train) {
      out.discarded = rest;
      if (full == 0)
        out.warnings.push_back("cuboid has " + std::to_string(n) + " points, fewer than S=" + std::to_string(S) +
                               "; no training sub-cloud produced");
    } else {
      std::vector<std::size_t> last(order.begin() + full * S, order.end());
      padded = S - rest;
      for (std::size_t k = 0; k < padded; ++k) last.push_back(rng.index(n));
      chunks.push_back(std::move(last));
    }
  }
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    SubCloud sc;
    sc.source_indices = std::move(chunks[c]);
    sc.rotation_gt = rotation_gt;
    sc.padded = (mode == SplitMode::test && rest > 0 && c + 1 == chunks.size()) ? padded : 0;
    sc.points.reserve(S);
    for (auto i : sc.source_indices) {
      sc.points.push_back(cuboid.points[i]);
      sc.labels.push_back(cuboid.has_labels() ? cuboid.labels[i] : 0);
    }
    if (normalize_points) sc.points = normalize(sc.points, sc.normalization);
    out.subclouds.push_back(std::move(sc));
  }
  return out;
}

void to_json(nlohmann::json& j, const PreprocessRecord& r) {
  j = {{"seed", r.seed},
       {"raw_count", r.raw_count},
       {"cuboid_count", r.cuboid_count},
       {"outside_count", r.outside_count},
       {"cuboid_center", r.cuboid_center},
       {"half_extents_used", r.half_extents_used},
       {"aug1", r.aug1},
       {"aug2", r.aug2},
       {"yaw_deg", r.yaw_deg},
       {"tilt_x_deg", r.tilt_x_deg},
       {"tilt_y_deg", r.tilt_y_deg},
       {"jitter_sigma", r.jitter_sigma},
       {"jitter_clip", r.jitter_clip},
       {"rotation_gt", r.rotation_gt}};
}

void from_json(const nlohmann::json& j, PreprocessRecord& r) {
  r.seed = j.at("seed").get<std::uint64_t>();
  r.raw_count = j.at("raw_count").get<std::size_t>();
  r.cuboid_count = j.at("cuboid_count").get<std::size_t>();
  r.outside_count = j.at("outside_count").get<std::size_t>();
  r.cuboid_center = j.at("cuboid_center").get<Vec3>();
  r.half_extents_used = j.at("half_extents_used").get<Vec3>();
  r.aug1 = j.at("aug1").get<bool>();
  r.aug2 = j.at("aug2").get<bool>();
  r.yaw_deg = j.at("yaw_deg").get<double>();
  r.tilt_x_deg = j.at("tilt_x_deg").get<double>();
  r.tilt_y_deg = j.at("tilt_y_deg").get<double>();
  r.jitter_sigma = j.at("jitter_sigma").get<double>();
  r.jitter_clip = j.at("jitter_clip").get<double>();
  r.rotation_gt = j.at("rotation_gt").get<Mat3>();
}

PreparedCuboid prepare_cuboid(const PointCloud& raw, const CuboidConfig& cuboid, const AugConfig& aug,
                              SplitMode mode, std::uint64_t seed) {
  const bool train = mode == SplitMode::train;
  CuboidConfig crop_cfg = cuboid;
  crop_cfg.jitter_size = train && aug.aug2;
  AugConfig aug_cfg = aug;
  aug_cfg.aug1 = train && aug.aug1;

  PreparedCuboid out;
  out.crop = crop_cuboid(raw, crop_cfg, mix_seed(seed ^ 0xa2));
  Aug1Result a1 = augment_aug1(out.crop.cuboid, aug_cfg, cuboid.center, mix_seed(seed ^ 0xa1));
  out.augmented = std::move(a1.cloud);

  PreprocessRecord& r = out.record;
  r.seed = seed;
  r.raw_count = raw.size();
  r.cuboid_count = out.crop.cuboid.size();
  r.outside_count = out.crop.outside_count;
  r.cuboid_center = cuboid.center;
  r.half_extents_used = out.crop.half_extents_used;
  r.aug1 = aug_cfg.aug1;
  r.aug2 = crop_cfg.jitter_size;
  r.yaw_deg = a1.yaw_deg;
  r.tilt_x_deg = a1.tilt_x_deg;
  r.tilt_y_deg = a1.tilt_y_deg;
  r.jitter_sigma = aug_cfg.aug1 ? aug.jitter_sigma : 0.0;
  r.jitter_clip = aug_cfg.aug1 ? aug.jitter_clip : 0.0;
  r.rotation_gt = a1.rotation_gt;
  return out;
}

SplitMode parse_split_mode(const std::string& s) {
  if (s == "train") return SplitMode::train;
  if (s == "test") return SplitMode::test;
  throw ValidationError("unknown split mode '" + s + "' (expected train or test)");
}

}  // namespace motorseg::preprocess
