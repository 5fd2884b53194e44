#include "motorseg/synthgen.hpp"

#include <cmath>
#include <limits>

namespace motorseg::synthgen {

namespace {

std::pair<Vec3, Vec3> transformed_bounds(const std::pair<Vec3, Vec3>& b, const RigidTransform& pose) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
  for (int i = 0; i < 8; ++i) {
    const Vec3 c((i & 1) ? b.second.x() : b.first.x(), (i & 2) ? b.second.y() : b.first.y(),
                 (i & 4) ? b.second.z() : b.first.z());
    const Vec3 w = pose.apply(c);
    lo = lo.cwiseMin(w);
    hi = hi.cwiseMax(w);
  }
  return {lo, hi};
}

Vec3 area_centroid(const TriangleSet& mesh) {
  Vec3 sum = Vec3::Zero();
  double area = 0.0;
  for (const auto& t : mesh.triangles) {
    sum += t.area() * t.centroid();
    area += t.area();
  }
  return area > 0 ? Vec3(sum / area) : Vec3::Zero();
}

/// Does the segment a->b pass through the axis-aligned box?
bool segment_hits_box(const Vec3& a, const Vec3& b, const Box& box) {
  const Vec3 d = b - a;
  double t0 = 0.0, t1 = 1.0;
  for (int k = 0; k < 3; ++k) {
    const double lo = box.center[k] - box.half_extents[k], hi = box.center[k] + box.half_extents[k];
    if (std::abs(d[k]) < 1e-15) {
      if (a[k] < lo || a[k] > hi) return false;
      continue;
    }
    double ta = (lo - a[k]) / d[k], tb = (hi - a[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

bool boxes_overlap(const Vec3& alo, const Vec3& ahi, const Vec3& blo, const Vec3& bhi) {
  return (alo.array() <= bhi.array()).all() && (blo.array() <= ahi.array()).all();
}

/// Points on each screw head's top disk (centre and rim) that tiles must not hide.
std::vector<Vec3> screw_sight_points(const MotorSpec& motor, const RigidTransform& pose) {
  std::vector<Vec3> out;
  auto add = [&](const Screw& s) {
    const Vec3 top = s.position + Vec3(0, 0, s.head_height);
    out.push_back(pose.apply(top));
    for (int k = 0; k < 4; ++k) {
      const double a = k * 0.5 * 3.141592653589793;
      out.push_back(pose.apply(top + s.head_radius * Vec3(std::cos(a), std::sin(a), 0)));
    }
  };
  for (const auto& s : motor.cover_screws) add(s);
  add(motor.side_screw);
  return out;
}

}  // namespace

std::string to_string(Domain d) { return d == Domain::sim ? "sim" : "pseudo_real"; }

Domain parse_domain(const std::string& s) {
  if (s == "sim") return Domain::sim;
  if (s == "pseudo_real") return Domain::pseudo_real;
  throw ValidationError("unknown domain '" + s + "' (expected sim or pseudo_real)");
}

double ClampModel::top_z() const {
  double z = -std::numeric_limits<double>::infinity();
  for (const auto& b : boxes) z = std::max(z, b.max().z());
  return z;
}

ClampModel ClampModel::standard() {
  ClampModel c;
  c.boxes.push_back({Vec3(0, 0, 0.01), Vec3(0.14, 0.10, 0.01)});
  c.boxes.push_back({Vec3(0, -0.085, 0.0275), Vec3(0.14, 0.01, 0.0075)});
  c.boxes.push_back({Vec3(0, 0.085, 0.0275), Vec3(0.14, 0.01, 0.0075)});
  c.seat_z = 0.02;
  return c;
}

RigidTransform look_at(const Vec3& position, const Vec3& target) {
  const Vec3 z = (target - position).normalized();
  Vec3 x = z.cross(Vec3::UnitZ());
  if (x.norm() < 1e-9) x = Vec3::UnitX();
  x.normalize();
  const Vec3 y = z.cross(x);
  RigidTransform t;
  t.rotation.col(0) = x;
  t.rotation.col(1) = y;
  t.rotation.col(2) = z;
  t.translation = position;
  return t;
}

void SceneSpec::validate() const {
  motor.validate();
  if (!(sample_density > 0.0)) throw ValidationError("sample_density must be > 0");
  if (!(noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be >= 0");
  if (!(panel.half_extent > 0.0)) throw ValidationError("panel half extent must be > 0");
  const TriangleSet m = generate_motor(motor);
  const auto [lo, hi] = transformed_bounds(m.bounds(), motor_pose);
  if (lo.z() < panel.z - 1e-9) throw ValidationError("motor pose places the motor below the panel");
  const double clamp_top = clamp.top_z();
  for (std::size_t i = 0; i < occluder_tiles.size(); ++i)
    if (!(occluder_tiles[i].min().z() > clamp_top))
      throw ValidationError("occluder tile " + std::to_string(i) + " does not hover above the clamp");
  Vec3 centroid = area_centroid(m);
  centroid = motor_pose.apply(centroid);
  const Vec3 view = camera_pose.rotation.col(2);
  const Vec3 want = (centroid - camera_pose.translation).normalized();
  if (view.dot(want) < std::cos(1e-6)) throw ValidationError("camera is not aimed at the motor centroid");
}

TriangleSet assemble_scene(const SceneSpec& spec) {
  spec.validate();
  TriangleSet scene;
  scene.append(generate_motor(spec.motor), spec.motor_pose);
  for (std::size_t i = 0; i < spec.clamp.boxes.size(); ++i)
    scene.add_box(spec.clamp.boxes[i], Mat3::Identity(), kBackgroundLabel, "clamp_" + std::to_string(i));
  const double h = spec.panel.half_extent;
  scene.add_quad(Vec3(0, 0, spec.panel.z), Vec3(h, 0, 0), Vec3(0, h, 0), kBackgroundLabel, "panel");
  for (std::size_t i = 0; i < spec.occluder_tiles.size(); ++i)
    scene.add_box(spec.occluder_tiles[i], Mat3::Identity(), kBackgroundLabel, "tile_" + std::to_string(i));
  return scene;
}

std::vector<Vec3> world_cover_screw_centers(const SceneSpec& spec) {
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < spec.motor.cover_screws.size(); ++i)
    out.push_back(spec.motor_pose.apply(spec.motor.cover_screw_center(i)));
  return out;
}

GenerationProfile GenerationProfile::defaults(Domain d) {
  GenerationProfile p;
  p.domain = d;
  if (d == Domain::pseudo_real) {
    p.noise_sigma = 0.0015;
    p.motor.pole_radius = {0.019, 0.023};
    p.motor.pole_length = {0.10, 0.12};
    p.motor.gear_height = {0.050, 0.060};
    p.motor.head_radius = {0.005, 0.006};
    p.motor.cover_screw_count = {2, 4};
    p.tiles.enabled = false;
  }
  return p;
}

SceneSpec random_scene_spec(Rng& rng, const MotorSpec& motor, const GenerationProfile& profile) {
  SceneSpec s;
  s.motor = motor;
  s.domain = profile.domain;
  s.sample_density = profile.sample_density;
  s.noise_sigma = profile.noise_sigma;
  const TriangleSet mesh = generate_motor(motor);
  const auto local_bounds = mesh.bounds();
  const Vec3 mid = 0.5 * (local_bounds.first + local_bounds.second);

  double yaw = 0.0;
  Vec3 jitter = Vec3::Zero();
  if (profile.pose.enabled) {
    yaw = deg2rad(rng.uniform(-profile.pose.yaw_deg, profile.pose.yaw_deg));
    for (int k = 0; k < 3; ++k)
      jitter[k] = profile.pose.translation[k] > 0
                      ? rng.uniform(-profile.pose.translation[k], profile.pose.translation[k])
                      : 0.0;
  }
  s.motor_pose.rotation = rotation_about_axis(Vec3::UnitZ(), yaw);
  s.motor_pose.translation =
      -(s.motor_pose.rotation * Vec3(mid.x(), mid.y(), 0.0)) + Vec3(0, 0, s.clamp.seat_z) + jitter;

  const Vec3 centroid = s.motor_pose.apply(area_centroid(mesh));
  const double az = deg2rad(rng.uniform(profile.camera.azimuth_deg.lo, profile.camera.azimuth_deg.hi));
  const double el = deg2rad(rng.uniform(profile.camera.elevation_deg.lo, profile.camera.elevation_deg.hi));
  const double dist = rng.uniform(profile.camera.distance.lo, profile.camera.distance.hi);
  const Vec3 cam = centroid + dist * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
  s.camera_pose = look_at(cam, centroid);

  if (profile.tiles.enabled) {
    const auto& tc = profile.tiles;
    const auto [mlo, mhi] = transformed_bounds(local_bounds, s.motor_pose);
    const Vec3 margin = Vec3::Constant(0.002);
    const auto sights = screw_sight_points(motor, s.motor_pose);
    const double top = s.clamp.top_z();
    Vec3 foot_lo = Vec3::Constant(std::numeric_limits<double>::infinity()), foot_hi = -foot_lo;
    for (const auto& b : s.clamp.boxes) {
      foot_lo = foot_lo.cwiseMin(b.min());
      foot_hi = foot_hi.cwiseMax(b.max());
    }
    const int count = rng.uniform_int(tc.count.lo, tc.count.hi);
    for (int t = 0; t < count; ++t) {
      for (int attempt = 0; attempt < tc.max_attempts; ++attempt) {
        Box tile;
        tile.half_extents = Vec3(rng.uniform(tc.half_extent.lo, tc.half_extent.hi),
                                 rng.uniform(tc.half_extent.lo, tc.half_extent.hi), 0.5 * tc.thickness);
        tile.center = Vec3(rng.uniform(foot_lo.x(), foot_hi.x()), rng.uniform(foot_lo.y(), foot_hi.y()),
                           top + rng.uniform(tc.hover.lo, tc.hover.hi));
        if (boxes_overlap(tile.min(), tile.max(), mlo - margin, mhi + margin)) continue;
        bool hides = false;
        for (const Vec3& p : sights) hides = hides || segment_hits_box(cam, p, tile);
        if (hides) continue;
        s.occluder_tiles.push_back(tile);
        break;
      }
    }
  }
  return s;
}

}  // namespace motorseg::synthgen
