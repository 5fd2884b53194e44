#include "doctest.h"

#include "motorseg/preprocess.hpp"
#include "motorseg/random.hpp"

#include <algorithm>
#include <cmath>
#include <set>

using namespace motorseg;
using namespace motorseg::preprocess;

namespace {

PointCloud random_cloud(std::size_t n, std::uint64_t seed, double extent = 0.1) {
  Rng rng(seed);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    c.points.emplace_back(rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(-extent, extent));
    c.labels.push_back(static_cast<std::uint8_t>(rng.uniform_int(0, 5)));
  }
  return c;
}

CuboidConfig unit_cuboid() {
  CuboidConfig c;
  c.center = Vec3::Zero();
  c.half_extents = Vec3::Constant(1.0);
  return c;
}

}  // namespace

TEST_CASE("crop keeps everything inside a large cuboid") {
  const PointCloud c = random_cloud(500, 1);
  const CropResult r = crop_cuboid(c, unit_cuboid(), 0);
  CHECK(r.outside_count == 0);
  CHECK(r.cuboid.points == c.points);
  CHECK(r.cuboid.labels == c.labels);
}

TEST_CASE("crop bounds are closed") {
  PointCloud c;
  c.points = {Vec3(1, 0, 0), Vec3(-1, 1, -1), Vec3(1.0000001, 0, 0), Vec3(0, 0, 0)};
  c.labels = {1, 2, 3, 4};
  const CropResult r = crop_cuboid(c, unit_cuboid(), 0);
  CHECK(r.cuboid.size() == 3);
  CHECK(r.outside_count == 1);
  CHECK(r.source_indices == std::vector<std::size_t>{0, 1, 3});
  CHECK(r.cuboid.labels == std::vector<std::uint8_t>{1, 2, 4});
}

TEST_CASE("crop errors") {
  CHECK_THROWS_AS(crop_cuboid(PointCloud{}, unit_cuboid(), 0), ValidationError);
  PointCloud far;
  far.points = {Vec3(5, 5, 5)};
  far.labels = {0};
  CHECK_THROWS_AS(crop_cuboid(far, unit_cuboid(), 0), ValidationError);
  CuboidConfig bad = unit_cuboid();
  bad.half_extents.y() = 0;
  CHECK_THROWS_AS(crop_cuboid(far, bad, 0), ValidationError);
  bad = unit_cuboid();
  bad.size_jitter_hi = 2.5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("aug2 draws per-axis multipliers within the configured range") {
  const PointCloud c = random_cloud(200, 2, 0.5);
  CuboidConfig cfg = unit_cuboid();
  cfg.jitter_size = true;
  std::set<double> seen;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const CropResult r = crop_cuboid(c, cfg, s);
    for (int k = 0; k < 3; ++k) {
      CHECK(r.half_extents_used[k] >= 0.85);
      CHECK(r.half_extents_used[k] <= 1.25);
      seen.insert(r.half_extents_used[k]);
    }
  }
  CHECK(seen.size() == 150);
}

TEST_CASE("aug1 disabled is the identity") {
  const PointCloud c = random_cloud(100, 3);
  AugConfig cfg;
  cfg.aug1 = false;
  const Aug1Result r = augment_aug1(c, cfg, Vec3(0.1, 0.2, 0.3), 9);
  CHECK(r.cloud.points == c.points);
  CHECK(r.rotation_gt == Mat3::Identity());
}

TEST_CASE("aug1 rotation is exact, orthonormal and invertible") {
  const PointCloud c = random_cloud(300, 4);
  AugConfig cfg;
  cfg.jitter_sigma = 0;
  cfg.jitter_clip = 0;
  const Vec3 center(0.05, -0.02, 0.06);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Aug1Result r = augment_aug1(c, cfg, center, s);
    const Mat3& R = r.rotation_gt;
    CHECK((R.transpose() * R - Mat3::Identity()).norm() < 1e-12);
    CHECK(R.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(r.tilt_x_deg) <= 15.0);
    CHECK(std::abs(r.tilt_y_deg) <= 15.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      const Vec3 back = center + R.transpose() * (r.cloud.points[i] - center);
      CHECK((back - c.points[i]).norm() < 1e-9);
    }
    for (std::size_t i = 0; i + 1 < c.size(); i += 7) {
      const double d0 = (c.points[i] - c.points[i + 1]).norm();
      const double d1 = (r.cloud.points[i] - r.cloud.points[i + 1]).norm();
      CHECK(std::abs(d0 - d1) < 1e-9);
    }
  }
}

TEST_CASE("aug1 jitter is clipped per coordinate") {
  const PointCloud c = random_cloud(2000, 5);
  AugConfig cfg;
  cfg.yaw_lo_deg = cfg.yaw_hi_deg = 0;
  cfg.tilt_deg = 0;
  cfg.jitter_sigma = 0.01;
  cfg.jitter_clip = 0.05;
  const Aug1Result r = augment_aug1(c, cfg, Vec3::Zero(), 6);
  double max_disp = 0;
  for (std::size_t i = 0; i < c.size(); ++i) max_disp = std::max(max_disp, (r.cloud.points[i] - c.points[i]).norm());
  CHECK(max_disp <= 0.05 * std::sqrt(3.0) + 1e-12);
  CHECK(max_disp > 0.01);
  cfg.jitter_clip = 0.005;
  CHECK_THROWS_AS(augment_aug1(c, cfg, Vec3::Zero(), 6), ValidationError);
}

TEST_CASE("normalization examples and round trip") {
  std::vector<Vec3> two{Vec3(0, 0, 0), Vec3(2, 0, 0)};
  Normalization n;
  const auto q = normalize(two, n);
  CHECK(n.offset == Vec3(1, 0, 0));
  CHECK(n.scale == 1.0);
  CHECK(q[0] == Vec3(-1, 0, 0));
  CHECK(q[1] == Vec3(1, 0, 0));

  const PointCloud c = random_cloud(500, 7, 3.0);
  const auto u = normalize(c.points, n);
  for (const auto& p : u) CHECK(p.norm() <= 1.0 + 1e-12);
  for (std::size_t i = 0; i < u.size(); ++i) CHECK((n.invert(u[i]) - c.points[i]).norm() < 1e-9);
  Normalization again;
  const auto uu = normalize(u, again);
  CHECK(again.offset.norm() < 1e-9);
  CHECK(again.scale == doctest::Approx(1.0).epsilon(1e-9));
  for (std::size_t i = 0; i < u.size(); ++i) CHECK((uu[i] - u[i]).norm() < 1e-9);

  std::vector<Vec3> same(4, Vec3(1, 2, 3));
  const auto s = normalize(same, n);
  CHECK(n.degenerate);
  CHECK(n.scale == kMinNormalizationScale);
  for (const auto& p : s) CHECK(p.norm() == 0.0);
  CHECK_THROWS_AS(fit_normalization(std::vector<Vec3>{}), ValidationError);
}

TEST_CASE("split counts follow the residual rule") {
  const PointCloud c = random_cloud(5000, 8);
  const SplitResult train = split_subclouds(c, 2048, SplitMode::train, 1);
  CHECK(train.subclouds.size() == 2);
  CHECK(train.discarded == 904);
  const SplitResult test = split_subclouds(c, 2048, SplitMode::test, 1);
  REQUIRE(test.subclouds.size() == 3);
  const SubCloud& last = test.subclouds[2];
  CHECK(last.size() == 2048);
  CHECK(last.padded == 1144);
  std::set<std::size_t> first_part(last.source_indices.begin(), last.source_indices.begin() + 904);
  CHECK(first_part.size() == 904);
  std::set<std::size_t> covered;
  for (const auto& sc : test.subclouds) {
    CHECK(sc.size() == 2048);
    covered.insert(sc.source_indices.begin(), sc.source_indices.end());
  }
  CHECK(covered.size() == 5000);
  std::set<std::size_t> train_seen;
  for (const auto& sc : train.subclouds)
    for (auto i : sc.source_indices) CHECK(train_seen.insert(i).second);
}

TEST_CASE("split of exactly S points is one permutation") {
  const PointCloud c = random_cloud(2048, 9);
  for (SplitMode m : {SplitMode::train, SplitMode::test}) {
    const SplitResult r = split_subclouds(c, 2048, m, 3);
    REQUIRE(r.subclouds.size() == 1);
    auto idx = r.subclouds[0].source_indices;
    std::sort(idx.begin(), idx.end());
    for (std::size_t i = 0; i < idx.size(); ++i) CHECK(idx[i] == i);
    CHECK(r.subclouds[0].padded == 0);
  }
}

TEST_CASE("small cuboids") {
  const PointCloud c = random_cloud(100, 10);
  const SplitResult train = split_subclouds(c, 256, SplitMode::train, 1);
  CHECK(train.subclouds.empty());
  CHECK(train.warnings.size() == 1);
  const SplitResult test = split_subclouds(c, 256, SplitMode::test, 1);
  REQUIRE(test.subclouds.size() == 1);
  CHECK(test.subclouds[0].size() == 256);
  CHECK(test.subclouds[0].padded == 156);
  std::set<std::size_t> covered(test.subclouds[0].source_indices.begin(), test.subclouds[0].source_indices.end());
  CHECK(covered.size() == 100);
}

TEST_CASE("sub-clouds carry labels, rotation and normalization") {
  const PointCloud c = random_cloud(3000, 11);
  const Mat3 R = rotation_about_axis(Vec3(1, 2, 3), 0.7);
  const SplitResult r = split_subclouds(c, 1024, SplitMode::test, 5, R);
  for (const auto& sc : r.subclouds) {
    CHECK(sc.rotation_gt == R);
    CHECK(sc.normalization.scale > 0);
    for (std::size_t i = 0; i < sc.size(); ++i) {
      CHECK(sc.labels[i] == c.labels[sc.source_indices[i]]);
      CHECK((sc.normalization.invert(sc.points[i]) - c.points[sc.source_indices[i]]).norm() < 1e-9);
      CHECK(sc.points[i].norm() <= 1.0 + 1e-12);
    }
  }
  const SplitResult raw = split_subclouds(c, 1024, SplitMode::test, 5, R, false);
  for (std::size_t i = 0; i < raw.subclouds[0].size(); ++i)
    CHECK(raw.subclouds[0].points[i] == c.points[raw.subclouds[0].source_indices[i]]);
  CHECK_THROWS_AS(split_subclouds(c, 0, SplitMode::test, 1), ValidationError);
  CHECK_THROWS_AS(split_subclouds(PointCloud{}, 4, SplitMode::test, 1), ValidationError);
}

TEST_CASE("prepare_cuboid applies augmentations only for training and records them") {
  const PointCloud c = random_cloud(4000, 12, 0.12);
  CuboidConfig cub;
  cub.center = Vec3::Zero();
  cub.half_extents = Vec3::Constant(0.1);
  AugConfig aug;
  const PreparedCuboid test = prepare_cuboid(c, cub, aug, SplitMode::test, 3);
  CHECK_FALSE(test.record.aug1);
  CHECK_FALSE(test.record.aug2);
  CHECK(test.augmented.points == test.crop.cuboid.points);
  CHECK(test.record.half_extents_used == cub.half_extents);
  const PreparedCuboid train = prepare_cuboid(c, cub, aug, SplitMode::train, 3);
  CHECK(train.record.aug1);
  CHECK(train.record.aug2);
  CHECK(train.record.raw_count == 4000);
  CHECK(train.record.cuboid_count + train.record.outside_count == 4000);
  nlohmann::json j = train.record;
  const auto back = j.get<PreprocessRecord>();
  CHECK(back.rotation_gt == train.record.rotation_gt);
  CHECK(back.half_extents_used == train.record.half_extents_used);
  CHECK(back.yaw_deg == train.record.yaw_deg);
}
