#include "motorseg/synthgen.hpp"

#include <algorithm>
#include <cmath>

namespace motorseg::synthgen {

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(std::string(what) + " must be > 0");
}

void require_screw(const Screw& s, const char* what) {
  require_positive(s.head_radius, what);
  require_positive(s.head_height, what);
  if (!s.position.allFinite()) throw ValidationError(std::string(what) + " position is not finite");
}

}  // namespace

Vec3 MotorSpec::cover_screw_center(std::size_t i) const {
  const Screw& s = cover_screws.at(i);
  return s.position + Vec3(0, 0, 0.5 * s.head_height);
}

Vec3 MotorSpec::side_screw_center() const {
  return side_screw.position + Vec3(0, 0, 0.5 * side_screw.head_height);
}

void MotorSpec::validate() const {
  require_positive(pole_pot.radius, "pole_pot.radius");
  require_positive(pole_pot.length, "pole_pot.length");
  require_positive(gear_container.width, "gear_container.width");
  require_positive(gear_container.depth, "gear_container.depth");
  require_positive(gear_container.height, "gear_container.height");
  require_positive(electric_connection.width, "electric_connection.width");
  require_positive(electric_connection.depth, "electric_connection.depth");
  require_positive(electric_connection.height, "electric_connection.height");
  require_positive(cover.thickness, "cover.thickness");
  require_positive(cover.extent_x, "cover.extent_x");
  require_positive(cover.extent_y, "cover.extent_y");
  if (cylinder_segments < 3) throw ValidationError("cylinder_segments must be >= 3");
  if (cover_screws.size() < 2) throw ValidationError("a motor needs at least 2 cover screws");
  require_screw(side_screw, "side_screw");

  const double top = cover_top();
  for (std::size_t i = 0; i < cover_screws.size(); ++i) {
    const Screw& s = cover_screws[i];
    require_screw(s, "cover screw");
    const std::string id = "cover screw " + std::to_string(i);
    if (std::abs(s.position.z() - top) > 1e-9) throw ValidationError(id + " is not on the cover plate");
    if (std::abs(s.position.x()) + s.head_radius > 0.5 * cover.extent_x + 1e-12 ||
        std::abs(s.position.y()) + s.head_radius > 0.5 * cover.extent_y + 1e-12)
      throw ValidationError(id + " head extends past the cover plate");
    if (!(side_screw_center().z() < cover_screw_center(i).z()))
      throw ValidationError("side screw must lie strictly below " + id);
    for (std::size_t j = 0; j < i; ++j) {
      const Screw& o = cover_screws[j];
      if ((s.position - o.position).head<2>().norm() < s.head_radius + o.head_radius)
        throw ValidationError("cover screws " + std::to_string(j) + " and " + std::to_string(i) +
                              " overlap");
    }
  }
}

MotorSpec demo_motor_spec() {
  MotorSpec m;
  m.cover.extent_x = m.gear_container.width + 0.002;
  m.cover.extent_y = m.gear_container.depth + 0.002;
  const double top = m.cover_top();
  const double ix = 0.5 * m.cover.extent_x - 0.008, iy = 0.5 * m.cover.extent_y - 0.008;
  for (const Vec3& p : {Vec3(-ix, -iy, top), Vec3(ix, -iy, top), Vec3(ix, iy, top)})
    m.cover_screws.push_back({p, 0.005, 0.0035});
  const double x = 0.5 * m.gear_container.width + m.pole_pot.length - 0.005 - 0.008;
  m.side_screw = {Vec3(x, 0, 2 * m.pole_pot.radius - 0.0005), 0.005, 0.0035};
  return m;
}

TriangleSet generate_motor(const MotorSpec& spec) {
  spec.validate();
  TriangleSet mesh;
  const auto& gc = spec.gear_container;
  const auto& ec = spec.electric_connection;
  const Mat3 I = Mat3::Identity();
  const int seg = spec.cylinder_segments;

  mesh.add_cylinder(Vec3(0.5 * gc.width, 0, spec.pole_pot.radius), Vec3::UnitX(), spec.pole_pot.radius,
                    spec.pole_pot.length, seg, static_cast<std::uint8_t>(Category::pole_pot), "pole_pot");
  mesh.add_box({Vec3(ec.offset, -0.5 * gc.depth - 0.5 * ec.depth, 0.45 * gc.height),
                0.5 * Vec3(ec.width, ec.depth, ec.height)},
               I, static_cast<std::uint8_t>(Category::electric_connection), "electric_connection");
  mesh.add_box({Vec3(0, 0, 0.5 * gc.height), 0.5 * Vec3(gc.width, gc.depth, gc.height)}, I,
               static_cast<std::uint8_t>(Category::gear_container), "gear_container");
  mesh.add_box({Vec3(0, 0, gc.height + 0.5 * spec.cover.thickness),
                0.5 * Vec3(spec.cover.extent_x, spec.cover.extent_y, spec.cover.thickness)},
               I, kCoverLabel, "cover");
  for (std::size_t i = 0; i < spec.cover_screws.size(); ++i) {
    const Screw& s = spec.cover_screws[i];
    mesh.add_cylinder(s.position, Vec3::UnitZ(), s.head_radius, s.head_height, seg, kScrewLabel,
                      "cover_screw_" + std::to_string(i));
  }
  mesh.add_cylinder(spec.side_screw.position, Vec3::UnitZ(), spec.side_screw.head_radius,
                    spec.side_screw.head_height, seg, kScrewLabel, "side_screw");
  return mesh;
}

MotorSpec random_motor_spec(Rng& rng, const MotorRanges& r) {
  auto draw = [&](const Range<double>& range) { return rng.uniform(range.lo, range.hi); };
  MotorSpec m;
  m.seed = rng.next();
  m.gear_container = {draw(r.gear_width), draw(r.gear_depth), draw(r.gear_height)};
  m.pole_pot = {draw(r.pole_radius), draw(r.pole_length)};
  m.cover.thickness = draw(r.cover_thickness);
  const double overhang = draw(r.cover_overhang);
  m.cover.extent_x = m.gear_container.width + 2 * overhang;
  m.cover.extent_y = m.gear_container.depth + 2 * overhang;
  auto& ec = m.electric_connection;
  ec.width = std::min(draw(r.conn_width), 0.9 * m.gear_container.width);
  ec.depth = draw(r.conn_depth);
  ec.height = std::min(draw(r.conn_height), 0.8 * m.gear_container.height);
  const double slack = 0.5 * (m.gear_container.width - ec.width);
  ec.offset = rng.uniform(-slack, slack);

  const double top = m.cover_top();
  const int n = rng.uniform_int(r.cover_screw_count.lo, r.cover_screw_count.hi);
  std::vector<Screw> heads(static_cast<std::size_t>(n));
  double max_r = 0.0;
  for (auto& s : heads) {
    s.head_radius = draw(r.head_radius);
    s.head_height = draw(r.head_height);
    max_r = std::max(max_r, s.head_radius);
  }
  // corner slots first, then mid-edge slots, in random order within each tier
  const double margin = max_r + 0.003;
  const double ix = 0.5 * m.cover.extent_x - margin, iy = 0.5 * m.cover.extent_y - margin;
  std::vector<Vec3> corners{{-ix, -iy, top}, {ix, -iy, top}, {ix, iy, top}, {-ix, iy, top}};
  std::vector<Vec3> edges{{0, -iy, top}, {ix, 0, top}, {0, iy, top}, {-ix, 0, top}};
  std::shuffle(corners.begin(), corners.end(), rng.engine());
  std::shuffle(edges.begin(), edges.end(), rng.engine());
  corners.insert(corners.end(), edges.begin(), edges.end());
  for (std::size_t i = 0; i < heads.size(); ++i) {
    heads[i].position = corners.at(i);
    m.cover_screws.push_back(heads[i]);
  }

  Screw side;
  side.head_radius = draw(r.head_radius);
  side.head_height = draw(r.head_height);
  side.position = Vec3(0.5 * m.gear_container.width + m.pole_pot.length - side.head_radius - 0.008, 0,
                       2 * m.pole_pot.radius - 0.0005);
  m.side_screw = side;
  m.validate();
  return m;
}

}  // namespace motorseg::synthgen
