#include "doctest.h"

#include "motorseg/postprocess.hpp"
#include "motorseg/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace motorseg;
using namespace motorseg::postprocess;

namespace {

void add_blob(PointCloud& pc, const Vec3& center, double radius, int n, std::uint8_t label, Rng& rng) {
  for (int i = 0; i < n; ++i) {
    pc.points.push_back(center + Vec3(rng.uniform(-radius, radius), rng.uniform(-radius, radius),
                                      rng.uniform(-radius * 0.3, radius * 0.3)));
    pc.labels.push_back(label);
  }
}

// Flat square patch of cover points on z = h, optionally with vertical rim faces.
PointCloud cover_plate(double h, bool rims, double noise, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud pc;
  const auto cover = static_cast<std::uint8_t>(Category::cover);
  for (double x = -0.03; x <= 0.03; x += 0.001)
    for (double y = -0.03; y <= 0.03; y += 0.001) {
      pc.points.emplace_back(x, y, h + rng.normal(noise));
      pc.labels.push_back(cover);
    }
  if (rims)
    for (double y = -0.03; y <= 0.03; y += 0.001)
      for (double z = h - 0.006; z < h; z += 0.001) {
        pc.points.emplace_back(0.03 + rng.normal(noise), y, z);
        pc.labels.push_back(cover);
        pc.points.emplace_back(-0.03 + rng.normal(noise), y, z);
        pc.labels.push_back(cover);
      }
  return pc;
}

}  // namespace

TEST_CASE("three cover blobs and a lower side blob") {
  Rng rng(1);
  PointCloud pc;
  const std::vector<Vec3> covers{Vec3(0.0, 0.0, 0.1), Vec3(0.05, 0.0, 0.1), Vec3(0.0, 0.05, 0.1)};
  for (const auto& c : covers) add_blob(pc, c, 0.003, 60, 5, rng);
  add_blob(pc, Vec3(0.12, 0.0, 0.05), 0.003, 40, 5, rng);
  add_blob(pc, Vec3(0.0, 0.0, 0.0), 0.05, 200, 0, rng);
  const auto r = locate_screws(pc, {});
  REQUIRE(r.status == Status::ok);
  REQUIRE(r.centers.size() == 4);
  REQUIRE(r.side.has_value());
  CHECK(r.centers[*r.side].z() == doctest::Approx(0.05).epsilon(0.05));
  for (std::size_t c = 0; c < r.centers.size(); ++c)
    if (c != *r.side) CHECK(r.centers[c].z() > r.centers[*r.side].z());

  // centres are exact member means
  std::vector<Vec3> sum(4, Vec3::Zero());
  std::vector<int> cnt(4, 0);
  for (std::size_t i = 0; i < r.screw_points.size(); ++i) {
    const int c = r.labels.assignment[i];
    if (c < 0) continue;
    sum[c] += pc.points[r.screw_points[i]];
    ++cnt[c];
  }
  for (int c = 0; c < 4; ++c) CHECK((sum[c] / cnt[c] - r.centers[c]).norm() < 1e-15);
}

TEST_CASE("centres are invariant to point order") {
  Rng rng(2);
  PointCloud pc;
  add_blob(pc, Vec3(0, 0, 0.1), 0.003, 50, 5, rng);
  add_blob(pc, Vec3(0.04, 0, 0.08), 0.003, 50, 5, rng);
  PointCloud shuffled = pc;
  std::vector<std::size_t> perm(pc.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.points[i] = pc.points[perm[i]];
    shuffled.labels[i] = pc.labels[perm[i]];
  }
  auto a = locate_screws(pc, {}).centers;
  auto b = locate_screws(shuffled, {}).centers;
  auto key = [](const Vec3& v, const Vec3& w) { return v.x() < w.x(); };
  std::sort(a.begin(), a.end(), key);
  std::sort(b.begin(), b.end(), key);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i] - b[i]).norm() < 1e-15);
}

TEST_CASE("a single blob is a cover screw with a warning") {
  Rng rng(3);
  PointCloud pc;
  add_blob(pc, Vec3(0, 0, 0.1), 0.003, 50, 5, rng);
  const auto r = locate_screws(pc, {});
  CHECK(r.centers.size() == 1);
  CHECK_FALSE(r.side.has_value());
  CHECK(r.warnings.size() == 1);
  const auto rep = build_report(pc, {}, {});
  CHECK(rep.cover_screw_centers.size() == 1);
  CHECK_FALSE(rep.side_screw_center.has_value());
}

TEST_CASE("stray screw points are noise; no screw points is an error status") {
  PointCloud pc;
  for (int i = 0; i < 5; ++i) {
    pc.points.emplace_back(0.1 * i, 0, 0);
    pc.labels.push_back(5);
  }
  LocateParams p;
  p.min_pts = 6;
  const auto r = locate_screws(pc, p);
  CHECK(r.status == Status::no_clusters);
  CHECK(r.centers.empty());

  PointCloud none;
  none.points.emplace_back(0, 0, 0);
  none.labels.push_back(0);
  CHECK(locate_screws(none, {}).status == Status::no_screw_points);
  CHECK(build_report(none, {}, {}).status == Status::no_screw_points);
}

TEST_CASE("flat cover gives the plane normal") {
  const auto pc = cover_plate(0.06, false, 0.0, 1);
  OrientationParams p;
  p.viewpoint = Vec3(0.1, 0.2, 0.6);
  const auto o = screw_orientation(pc, p);
  CHECK(std::abs(o.direction.z() - 1.0) < 1e-9);
  CHECK(std::abs(o.direction.norm() - 1.0) < 1e-12);
  CHECK_FALSE(o.low_confidence);
}

TEST_CASE("rim faces do not tilt the orientation") {
  const auto pc = cover_plate(0.06, true, 0.0, 2);
  OrientationParams p;
  p.viewpoint = Vec3(0.0, 0.0, 0.6);
  const auto o = screw_orientation(pc, p);
  CHECK(rad2deg(std::acos(std::min(1.0, o.direction.z()))) < 2.0);
}

TEST_CASE("orientation is translation invariant and rotation equivariant") {
  const auto pc = cover_plate(0.06, true, 0.0003, 3);
  OrientationParams p;
  p.viewpoint = Vec3(0.05, -0.1, 0.5);
  const Vec3 base = screw_orientation(pc, p).direction;

  const Mat3 R = rotation_about_axis(Vec3(1, 2, 3).normalized(), 0.7);
  const Vec3 t(0.3, -0.2, 0.1);
  PointCloud moved = pc;
  for (auto& q : moved.points) q = R * q + t;
  OrientationParams pm = p;
  pm.viewpoint = R * p.viewpoint + t;
  const Vec3 got = screw_orientation(moved, pm).direction;
  CHECK(rad2deg(std::acos(std::min(1.0, got.dot(R * base)))) < 2.0);
}

TEST_CASE("too few cover points is a validation error") {
  PointCloud pc;
  for (int i = 0; i < 10; ++i) {
    pc.points.emplace_back(i, 0, 0);
    pc.labels.push_back(4);
  }
  CHECK_THROWS_AS(screw_orientation(pc, {}), ValidationError);
}

TEST_CASE("all-noise normals fall back to the mean, flagged low confidence") {
  const auto pc = cover_plate(0.06, false, 0.0, 4);
  OrientationParams p;
  p.viewpoint = Vec3(0, 0, 1);
  p.min_pts_n = pc.size() + 1;
  const auto o = screw_orientation(pc, p);
  CHECK(o.low_confidence);
  CHECK(o.direction.z() > 0.999);
}

TEST_CASE("report evaluation: exact, missing, flipped") {
  synthgen::SceneManifest m;
  m.cover_screw_centers = {Vec3(0, 0, 0.1), Vec3(0.05, 0, 0.1), Vec3(0, 0.05, 0.1)};
  m.cover_screw_radii = {0.005, 0.005, 0.005};
  m.screw_orientation = Vec3::UnitZ();
  ScrewReport r;
  r.cover_screw_centers = m.cover_screw_centers;
  r.orientation = Orientation{};
  r.orientation->direction = Vec3::UnitZ();
  auto e = evaluate_report(r, m);
  CHECK(e.matched == 3);
  CHECK(e.missed == 0);
  CHECK(e.spurious == 0);
  CHECK(e.angular_error_deg == 0.0);
  for (double d : e.center_errors) CHECK(d == 0.0);

  r.cover_screw_centers.pop_back();
  r.cover_screw_centers.push_back(Vec3(0.2, 0.2, 0.1));
  r.orientation->direction = -Vec3::UnitZ();
  e = evaluate_report(r, m);
  CHECK(e.missed == 1);
  CHECK(e.spurious == 1);
  CHECK(e.angular_error_deg == 0.0);

  const nlohmann::json j = r;
  CHECK(j["cover_screw_centers"].size() == 3);
  CHECK(j["parameters"]["min_pts"] == 8);
}

TEST_CASE("generated scene with oracle labels") {
  auto prof = synthgen::GenerationProfile::defaults(synthgen::Domain::sim);
  prof.noise_sigma = 0.0;
  const auto sc = synthgen::generate_scene(0, 99, prof);
  OrientationParams op;
  op.viewpoint = sc.manifest.scene.camera_position();
  const auto rep = build_report(sc.cloud, {}, op);
  const auto e = evaluate_report(rep, sc.manifest);
  CHECK(e.missed == 0);
  CHECK(e.spurious == 0);
  CHECK(e.max_center_error_ratio < 1.0);
  CHECK(e.angular_error_deg < 2.0);
  REQUIRE(rep.side_screw_center.has_value());
  CHECK((*rep.side_screw_center - sc.manifest.side_screw_center).norm() < sc.manifest.motor.side_screw.head_radius);
}
