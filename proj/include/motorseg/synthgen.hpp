#pragma once

// Procedural motor scenes and simulated depth-sensor sampling.
//
// Frames: the motor frame has +z up with the gear container's bottom face
// centred on the origin, the pole pot extending along +x and the electric
// connection on the -y face. The world (clamp) frame has +z up with the
// background panel at z = 0.

#include "motorseg/common.hpp"
#include "motorseg/mesh.hpp"
#include "motorseg/random.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace motorseg::synthgen {

struct PolePot {
  double radius = 0.018;
  double length = 0.1;
};

struct GearContainer {
  double width = 0.07;   // x
  double depth = 0.058;  // y
  double height = 0.052;
};

struct ElectricConnection {
  double width = 0.026;
  double depth = 0.018;
  double height = 0.024;
  double offset = 0.0;  ///< x position of its centre along the -y face
};

struct Cover {
  double thickness = 0.004;
  double extent_x = 0.072;
  double extent_y = 0.06;
};

/// Screw head. `position` is the centre of the head's base disk; the head
/// extends along the mounting surface normal.
struct Screw {
  Vec3 position = Vec3::Zero();
  double head_radius = 0.005;
  double head_height = 0.0035;
};

struct MotorSpec {
  PolePot pole_pot;
  GearContainer gear_container;
  ElectricConnection electric_connection;
  Cover cover;
  std::vector<Screw> cover_screws;
  Screw side_screw;
  std::uint64_t seed = 0;
  int cylinder_segments = 48;

  double cover_top() const { return gear_container.height + cover.thickness; }
  /// Head centre (half-way up the head) of a cover screw, motor frame.
  Vec3 cover_screw_center(std::size_t i) const;
  Vec3 side_screw_center() const;

  /// Throws ValidationError when any documented invariant fails.
  void validate() const;
};

/// Fixed demo motor with three cover screws.
MotorSpec demo_motor_spec();

/// Motor as labeled closed primitives in the motor frame.
TriangleSet generate_motor(const MotorSpec& spec);

enum class Domain { sim, pseudo_real };
std::string to_string(Domain d);
Domain parse_domain(const std::string& s);

struct ClampModel {
  std::vector<Box> boxes;
  /// Height the motor rests on.
  double seat_z = 0.02;

  double top_z() const;
  static ClampModel standard();
};

struct Panel {
  double half_extent = 0.325;
  double z = 0.0;
};

struct SceneSpec {
  MotorSpec motor;
  RigidTransform motor_pose;
  ClampModel clamp = ClampModel::standard();
  Panel panel;
  std::vector<Box> occluder_tiles;
  /// Columns of the rotation are the camera x (right), y (down), z (viewing) axes.
  RigidTransform camera_pose;
  double sample_density = 2.9e6;  ///< points per m^2 of surface
  double noise_sigma = 0.0005;    ///< metres, along the viewing ray
  Domain domain = Domain::sim;

  Vec3 camera_position() const { return camera_pose.translation; }
  void validate() const;
};

/// Camera at `position` whose viewing axis points at `target`.
RigidTransform look_at(const Vec3& position, const Vec3& target);

/// Motor, clamp, panel and tiles in the world frame. Clamp, panel and tiles
/// carry the background label.
TriangleSet assemble_scene(const SceneSpec& spec);

struct SampleResult {
  PointCloud cloud;
  std::size_t candidates = 0;  ///< surface samples before visibility culling
  std::vector<std::string> warnings;
};

/// Area-uniform surface samples (Poisson count per triangle), kept when the
/// segment from the camera reaches them unobstructed (1e-4 m tolerance),
/// then displaced along the viewing ray by N(0, noise_sigma).
SampleResult sample_scene(const TriangleSet& scene, const SceneSpec& spec, std::uint64_t seed);

// --- randomisation -----------------------------------------------------------

template <class T>
struct Range {
  T lo{};
  T hi{};
};

struct MotorRanges {
  Range<double> gear_width{0.065, 0.080};
  Range<double> gear_depth{0.050, 0.065};
  Range<double> gear_height{0.045, 0.058};
  Range<double> cover_thickness{0.003, 0.006};
  Range<double> cover_overhang{0.0, 0.003};
  Range<double> pole_radius{0.017, 0.021};
  Range<double> pole_length{0.090, 0.115};
  Range<double> conn_width{0.020, 0.032};
  Range<double> conn_depth{0.012, 0.022};
  Range<double> conn_height{0.018, 0.030};
  Range<double> head_radius{0.004, 0.005};
  Range<double> head_height{0.003, 0.004};
  Range<int> cover_screw_count{3, 4};
};

struct CameraRanges {
  Range<double> azimuth_deg{0.0, 360.0};
  Range<double> elevation_deg{35.0, 80.0};
  Range<double> distance{0.4, 0.7};
};

/// Generation-time augmentation (aug3: motor pose jitter).
struct PoseJitter {
  bool enabled = true;
  Vec3 translation{0.01, 0.01, 0.0};  ///< uniform +- per axis, metres
  double yaw_deg = 5.0;               ///< uniform +- about the vertical axis
};

/// Generation-time augmentation (aug4: hovering occluder tiles).
struct TileConfig {
  bool enabled = true;
  Range<int> count{0, 3};
  Range<double> half_extent{0.01, 0.05};
  Range<double> hover{0.02, 0.10};  ///< above the clamp top
  double thickness = 0.002;
  int max_attempts = 50;
};

struct GenerationProfile {
  Domain domain = Domain::sim;
  MotorRanges motor;
  CameraRanges camera;
  PoseJitter pose;
  TileConfig tiles;
  double sample_density = 2.9e6;
  double noise_sigma = 0.0005;

  /// Documented defaults for each domain. pseudo_real uses higher sensor
  /// noise, shifted part dimensions and no tiles.
  static GenerationProfile defaults(Domain d);
};

MotorSpec random_motor_spec(Rng& rng, const MotorRanges& ranges);

/// Random scene around `motor`. Tiles are redrawn when they would hide a
/// screw head from the camera or intersect the motor.
SceneSpec random_scene_spec(Rng& rng, const MotorSpec& motor, const GenerationProfile& profile);

/// Cover screw head centres (world frame) visible in the scene, ordered as in the spec.
std::vector<Vec3> world_cover_screw_centers(const SceneSpec& spec);

// --- dataset -----------------------------------------------------------------

struct SceneManifest {
  int scene_id = 0;
  std::uint64_t seed = 0;
  Domain domain = Domain::sim;
  MotorSpec motor;
  SceneSpec scene;
  std::vector<Vec3> cover_screw_centers;  ///< world frame, metres
  std::vector<double> cover_screw_radii;
  Vec3 side_screw_center = Vec3::Zero();
  Vec3 screw_orientation = Vec3::UnitZ();  ///< cover plane normal, unit
  std::array<std::size_t, kNumCategories> label_histogram{};
  std::string cloud_path;
};

struct GeneratedScene {
  PointCloud cloud;
  SceneManifest manifest;
};

std::uint64_t scene_seed(std::uint64_t dataset_seed, int scene_id, Domain domain);

/// One complete scene in memory.
GeneratedScene generate_scene(int scene_id, std::uint64_t dataset_seed,
                              const GenerationProfile& profile);

/// Writes scene_NNNN.mpc and scene_NNNN.json per scene into `out_dir`.
std::vector<SceneManifest> generate_dataset(int n_scenes, const std::filesystem::path& out_dir,
                                            std::uint64_t seed, const GenerationProfile& profile);

std::string scene_stem(int scene_id);

void to_json(nlohmann::json& j, const MotorSpec& m);
void from_json(const nlohmann::json& j, MotorSpec& m);
void to_json(nlohmann::json& j, const SceneSpec& s);
void from_json(const nlohmann::json& j, SceneSpec& s);
void to_json(nlohmann::json& j, const SceneManifest& m);
void from_json(const nlohmann::json& j, SceneManifest& m);
void to_json(nlohmann::json& j, const GenerationProfile& p);
void from_json(const nlohmann::json& j, GenerationProfile& p);

SceneManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const SceneManifest& m, const std::filesystem::path& path);

}  // namespace motorseg::synthgen
