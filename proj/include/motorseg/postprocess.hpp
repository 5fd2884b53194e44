#pragma once

// Screw localisation and a shared unscrewing direction from a labelled cloud.

#include "motorseg/common.hpp"
#include "motorseg/core.hpp"
#include "motorseg/json_io.hpp"
#include "motorseg/synthgen.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace motorseg::postprocess {

struct LocateParams {
  double eps = 0.006;  ///< 1.2x a typical 5 mm head radius
  std::size_t min_pts = 8;
  Vec3 up = Vec3::UnitZ();
};

struct OrientationParams {
  std::size_t normal_k = 30;
  double eps_n = 0.1;
  std::size_t min_pts_n = 20;
  /// Mean-shift refinement radius in normal space; 0 keeps the plain cluster mean.
  double refine_radius = 0.3;
  Vec3 viewpoint = Vec3::Zero();
};

enum class Status { ok, no_screw_points, no_clusters };
std::string to_string(Status s);

struct ScrewClusters {
  Status status = Status::ok;
  std::vector<std::size_t> screw_points;  ///< cloud indices of screw-labelled points
  core::ClusterLabels labels;             ///< parallel to screw_points
  std::vector<Vec3> centers;              ///< per cluster, mean of members
  std::vector<std::size_t> sizes;
  std::optional<std::size_t> side;  ///< cluster flagged as the side screw
  std::vector<std::string> warnings;
};

/// DBSCAN over screw-labelled points. The cluster whose centre is lowest
/// along `up` is the side screw when at least two clusters exist.
ScrewClusters locate_screws(const PointCloud& cloud, const LocateParams& params);

struct Orientation {
  Vec3 direction = Vec3::UnitZ();
  bool low_confidence = false;  ///< no normal-space cluster; all normals averaged
  std::size_t cover_points = 0;
  std::size_t cluster_size = 0;
  std::size_t refined_support = 0;  ///< normals averaged in the final refinement step
  int clusters = 0;
};

/// Normals of the cover points, DBSCAN in normal space, normalised mean of the
/// largest cluster, oriented toward the viewpoint. The mean is then refined
/// by averaging only the normals within refine_radius of it until it settles,
/// which drops faces chained into the cluster through rounded edges. Throws
/// ValidationError with fewer than normal_k cover points.
Orientation screw_orientation(const PointCloud& cloud, const OrientationParams& params);

struct ScrewReport {
  Status status = Status::ok;
  std::vector<Vec3> cover_screw_centers;
  std::vector<std::size_t> cover_cluster_sizes;
  std::optional<Vec3> side_screw_center;
  std::size_t side_cluster_size = 0;
  std::optional<Orientation> orientation;  ///< absent when too few cover points
  LocateParams locate;
  OrientationParams orient;
  std::vector<std::string> warnings;
};

ScrewReport build_report(const PointCloud& cloud, const LocateParams& locate, const OrientationParams& orient);

struct ReportEvaluation {
  std::vector<double> center_errors;  ///< metres, one per matched ground-truth screw
  std::size_t matched = 0, missed = 0, spurious = 0;
  double max_center_error_ratio = 0.0;  ///< max error / that screw's head radius
  double angular_error_deg = 0.0;       ///< NaN without an orientation
};

/// Greedy nearest matching (globally smallest distance first) of reported to
/// ground-truth cover centres within threshold_factor x head radius.
ReportEvaluation evaluate_report(const ScrewReport& report, const synthgen::SceneManifest& manifest,
                                 double threshold_factor = 1.5);

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LocateParams, eps, min_pts, up)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(OrientationParams, normal_k, eps_n, min_pts_n, refine_radius, viewpoint)

void to_json(nlohmann::json& j, const ScrewReport& r);
void to_json(nlohmann::json& j, const ReportEvaluation& e);

}  // namespace motorseg::postprocess
