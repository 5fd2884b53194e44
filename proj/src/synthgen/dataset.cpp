#include "motorseg/cloud_io.hpp"
#include "motorseg/json_io.hpp"
#include "motorseg/synthgen.hpp"

#include <cstdio>

namespace motorseg::synthgen {

using nlohmann::json;

namespace {

template <class T>
json range_json(const Range<T>& r) {
  return json::array({r.lo, r.hi});
}

template <class T>
void read_range(const json& j, const char* key, Range<T>& r) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2) throw ValidationError(std::string(key) + " must be [lo, hi]");
  r.lo = v[0].get<T>();
  r.hi = v[1].get<T>();
  if (r.lo > r.hi) throw ValidationError(std::string(key) + " has lo > hi");
}

json screw_json(const Screw& s) {
  return {{"position", s.position}, {"head_radius", s.head_radius}, {"head_height", s.head_height}};
}

Screw screw_from(const json& j) {
  return {j.at("position").get<Vec3>(), j.at("head_radius").get<double>(), j.at("head_height").get<double>()};
}

json box_json(const Box& b) { return {{"center", b.center}, {"half_extents", b.half_extents}}; }
Box box_from(const json& j) { return {j.at("center").get<Vec3>(), j.at("half_extents").get<Vec3>()}; }

}  // namespace

void to_json(json& j, const MotorSpec& m) {
  json screws = json::array();
  for (const auto& s : m.cover_screws) screws.push_back(screw_json(s));
  j = {{"pole_pot", {{"radius", m.pole_pot.radius}, {"length", m.pole_pot.length}}},
       {"gear_container",
        {{"width", m.gear_container.width}, {"depth", m.gear_container.depth}, {"height", m.gear_container.height}}},
       {"electric_connection",
        {{"width", m.electric_connection.width},
         {"depth", m.electric_connection.depth},
         {"height", m.electric_connection.height},
         {"offset", m.electric_connection.offset}}},
       {"cover", {{"thickness", m.cover.thickness}, {"extent", {m.cover.extent_x, m.cover.extent_y}}}},
       {"cover_screws", screws},
       {"side_screw", screw_json(m.side_screw)},
       {"seed", m.seed},
       {"cylinder_segments", m.cylinder_segments}};
}

void from_json(const json& j, MotorSpec& m) {
  m.pole_pot = {j.at("pole_pot").at("radius").get<double>(), j.at("pole_pot").at("length").get<double>()};
  const auto& g = j.at("gear_container");
  m.gear_container = {g.at("width").get<double>(), g.at("depth").get<double>(), g.at("height").get<double>()};
  const auto& e = j.at("electric_connection");
  m.electric_connection = {e.at("width").get<double>(), e.at("depth").get<double>(), e.at("height").get<double>(),
                           e.at("offset").get<double>()};
  m.cover.thickness = j.at("cover").at("thickness").get<double>();
  m.cover.extent_x = j.at("cover").at("extent").at(0).get<double>();
  m.cover.extent_y = j.at("cover").at("extent").at(1).get<double>();
  m.cover_screws.clear();
  for (const auto& s : j.at("cover_screws")) m.cover_screws.push_back(screw_from(s));
  m.side_screw = screw_from(j.at("side_screw"));
  m.seed = j.value("seed", std::uint64_t{0});
  m.cylinder_segments = j.value("cylinder_segments", 48);
}

void to_json(json& j, const SceneSpec& s) {
  json clamp = json::array(), tiles = json::array();
  for (const auto& b : s.clamp.boxes) clamp.push_back(box_json(b));
  for (const auto& b : s.occluder_tiles) tiles.push_back(box_json(b));
  j = {{"motor", s.motor},
       {"motor_pose", s.motor_pose},
       {"clamp_model", {{"boxes", clamp}, {"seat_z", s.clamp.seat_z}}},
       {"panel", {{"half_extent", s.panel.half_extent}, {"z", s.panel.z}}},
       {"occluder_tiles", tiles},
       {"camera_pose", s.camera_pose},
       {"sample_density", s.sample_density},
       {"noise_sigma", s.noise_sigma},
       {"domain_tag", to_string(s.domain)}};
}

void from_json(const json& j, SceneSpec& s) {
  s.motor = j.at("motor").get<MotorSpec>();
  s.motor_pose = j.at("motor_pose").get<RigidTransform>();
  s.clamp.boxes.clear();
  for (const auto& b : j.at("clamp_model").at("boxes")) s.clamp.boxes.push_back(box_from(b));
  s.clamp.seat_z = j.at("clamp_model").at("seat_z").get<double>();
  s.panel = {j.at("panel").at("half_extent").get<double>(), j.at("panel").at("z").get<double>()};
  s.occluder_tiles.clear();
  for (const auto& b : j.at("occluder_tiles")) s.occluder_tiles.push_back(box_from(b));
  s.camera_pose = j.at("camera_pose").get<RigidTransform>();
  s.sample_density = j.at("sample_density").get<double>();
  s.noise_sigma = j.at("noise_sigma").get<double>();
  s.domain = parse_domain(j.at("domain_tag").get<std::string>());
}

void to_json(json& j, const SceneManifest& m) {
  json radii = m.cover_screw_radii;
  j = {{"scene_id", m.scene_id},
       {"seed", m.seed},
       {"domain", to_string(m.domain)},
       {"motor", m.motor},
       {"scene", m.scene},
       {"cover_screw_centers", m.cover_screw_centers},
       {"cover_screw_radii", radii},
       {"side_screw_center", m.side_screw_center},
       {"screw_orientation", m.screw_orientation},
       {"label_histogram", m.label_histogram},
       {"cloud_path", m.cloud_path}};
}

void from_json(const json& j, SceneManifest& m) {
  m.scene_id = j.at("scene_id").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.domain = parse_domain(j.at("domain").get<std::string>());
  m.motor = j.at("motor").get<MotorSpec>();
  m.scene = j.at("scene").get<SceneSpec>();
  m.cover_screw_centers = j.at("cover_screw_centers").get<std::vector<Vec3>>();
  m.cover_screw_radii = j.at("cover_screw_radii").get<std::vector<double>>();
  m.side_screw_center = j.at("side_screw_center").get<Vec3>();
  m.screw_orientation = j.at("screw_orientation").get<Vec3>();
  m.label_histogram = j.at("label_histogram").get<std::array<std::size_t, kNumCategories>>();
  m.cloud_path = j.at("cloud_path").get<std::string>();
  if (m.cover_screw_centers.size() != m.motor.cover_screws.size())
    throw ValidationError("manifest screw centre count does not match the motor's cover screws");
  if (std::abs(m.screw_orientation.norm() - 1.0) > 1e-9)
    throw ValidationError("manifest screw orientation is not unit length");
}

void to_json(json& j, const GenerationProfile& p) {
  const auto& r = p.motor;
  j = {{"domain", to_string(p.domain)},
       {"sample_density", p.sample_density},
       {"noise_sigma", p.noise_sigma},
       {"motor",
        {{"gear_width", range_json(r.gear_width)},
         {"gear_depth", range_json(r.gear_depth)},
         {"gear_height", range_json(r.gear_height)},
         {"cover_thickness", range_json(r.cover_thickness)},
         {"cover_overhang", range_json(r.cover_overhang)},
         {"pole_radius", range_json(r.pole_radius)},
         {"pole_length", range_json(r.pole_length)},
         {"conn_width", range_json(r.conn_width)},
         {"conn_depth", range_json(r.conn_depth)},
         {"conn_height", range_json(r.conn_height)},
         {"head_radius", range_json(r.head_radius)},
         {"head_height", range_json(r.head_height)},
         {"cover_screw_count", range_json(r.cover_screw_count)}}},
       {"camera",
        {{"azimuth_deg", range_json(p.camera.azimuth_deg)},
         {"elevation_deg", range_json(p.camera.elevation_deg)},
         {"distance", range_json(p.camera.distance)}}},
       {"pose_jitter",
        {{"enabled", p.pose.enabled}, {"translation", p.pose.translation}, {"yaw_deg", p.pose.yaw_deg}}},
       {"tiles",
        {{"enabled", p.tiles.enabled},
         {"count", range_json(p.tiles.count)},
         {"half_extent", range_json(p.tiles.half_extent)},
         {"hover", range_json(p.tiles.hover)},
         {"thickness", p.tiles.thickness},
         {"max_attempts", p.tiles.max_attempts}}}};
}

/// Starts from the domain defaults; present keys override them.
void from_json(const json& j, GenerationProfile& p) {
  p = GenerationProfile::defaults(parse_domain(j.value("domain", std::string("sim"))));
  p.sample_density = j.value("sample_density", p.sample_density);
  p.noise_sigma = j.value("noise_sigma", p.noise_sigma);
  if (j.contains("motor")) {
    const auto& m = j.at("motor");
    auto& r = p.motor;
    read_range(m, "gear_width", r.gear_width);
    read_range(m, "gear_depth", r.gear_depth);
    read_range(m, "gear_height", r.gear_height);
    read_range(m, "cover_thickness", r.cover_thickness);
    read_range(m, "cover_overhang", r.cover_overhang);
    read_range(m, "pole_radius", r.pole_radius);
    read_range(m, "pole_length", r.pole_length);
    read_range(m, "conn_width", r.conn_width);
    read_range(m, "conn_depth", r.conn_depth);
    read_range(m, "conn_height", r.conn_height);
    read_range(m, "head_radius", r.head_radius);
    read_range(m, "head_height", r.head_height);
    read_range(m, "cover_screw_count", r.cover_screw_count);
  }
  if (j.contains("camera")) {
    const auto& c = j.at("camera");
    read_range(c, "azimuth_deg", p.camera.azimuth_deg);
    read_range(c, "elevation_deg", p.camera.elevation_deg);
    read_range(c, "distance", p.camera.distance);
  }
  if (j.contains("pose_jitter")) {
    const auto& c = j.at("pose_jitter");
    p.pose.enabled = c.value("enabled", p.pose.enabled);
    if (c.contains("translation")) p.pose.translation = c.at("translation").get<Vec3>();
    p.pose.yaw_deg = c.value("yaw_deg", p.pose.yaw_deg);
  }
  if (j.contains("tiles")) {
    const auto& c = j.at("tiles");
    p.tiles.enabled = c.value("enabled", p.tiles.enabled);
    read_range(c, "count", p.tiles.count);
    read_range(c, "half_extent", p.tiles.half_extent);
    read_range(c, "hover", p.tiles.hover);
    p.tiles.thickness = c.value("thickness", p.tiles.thickness);
    p.tiles.max_attempts = c.value("max_attempts", p.tiles.max_attempts);
  }
  if (!(p.sample_density > 0)) throw ValidationError("sample_density must be > 0");
  if (!(p.noise_sigma >= 0)) throw ValidationError("noise_sigma must be >= 0");
  if (p.motor.cover_screw_count.lo < 2 || p.motor.cover_screw_count.hi > 8)
    throw ValidationError("cover_screw_count must lie within [2, 8]");
}

std::uint64_t scene_seed(std::uint64_t dataset_seed, int scene_id, Domain domain) {
  const std::uint64_t salt = domain == Domain::sim ? 0x5151ULL : 0x7ea1ULL;
  return mix_seed(mix_seed(dataset_seed ^ salt) ^ static_cast<std::uint64_t>(scene_id));
}

std::string scene_stem(int scene_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%04d", scene_id);
  return buf;
}

GeneratedScene generate_scene(int scene_id, std::uint64_t dataset_seed, const GenerationProfile& profile) {
  GeneratedScene g;
  const std::uint64_t seed = scene_seed(dataset_seed, scene_id, profile.domain);
  Rng rng(seed);
  const MotorSpec motor = random_motor_spec(rng, profile.motor);
  const SceneSpec scene = random_scene_spec(rng, motor, profile);
  const TriangleSet triangles = assemble_scene(scene);
  SampleResult sampled = sample_scene(triangles, scene, rng.next());
  g.cloud = std::move(sampled.cloud);

  SceneManifest& m = g.manifest;
  m.scene_id = scene_id;
  m.seed = seed;
  m.domain = profile.domain;
  m.motor = motor;
  m.scene = scene;
  m.cover_screw_centers = world_cover_screw_centers(scene);
  for (const auto& s : motor.cover_screws) m.cover_screw_radii.push_back(s.head_radius);
  m.side_screw_center = scene.motor_pose.apply(motor.side_screw_center());
  m.screw_orientation = scene.motor_pose.apply_direction(Vec3::UnitZ()).normalized();
  m.label_histogram = g.cloud.label_histogram();
  return g;
}

std::vector<SceneManifest> generate_dataset(int n_scenes, const std::filesystem::path& out_dir,
                                            std::uint64_t seed, const GenerationProfile& profile) {
  if (n_scenes < 1) throw ValidationError("n_scenes must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    throw IoError("cannot create output directory " + out_dir.string());
  std::vector<SceneManifest> manifests;
  for (int i = 0; i < n_scenes; ++i) {
    GeneratedScene g = generate_scene(i, seed, profile);
    const std::string stem = scene_stem(i);
    g.manifest.cloud_path = stem + ".mpc";
    write_mpc(g.cloud, out_dir / g.manifest.cloud_path);
    save_manifest(g.manifest, out_dir / (stem + ".json"));
    manifests.push_back(std::move(g.manifest));
  }
  return manifests;
}

SceneManifest load_manifest(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  try {
    return j.get<SceneManifest>();
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

void save_manifest(const SceneManifest& m, const std::filesystem::path& path) {
  write_json_file(json(m), path);
}

}  // namespace motorseg::synthgen
