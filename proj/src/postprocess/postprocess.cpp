#include "motorseg/postprocess.hpp"

#include "motorseg/json_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace motorseg::postprocess {

std::string to_string(Status s) {
  switch (s) {
    case Status::ok: return "ok";
    case Status::no_screw_points: return "no_screw_points";
    case Status::no_clusters: return "no_clusters";
  }
  return "unknown";
}

namespace {

std::vector<std::size_t> with_label(const PointCloud& cloud, Category c) {
  if (!cloud.has_labels()) throw ValidationError("post-processing needs a labelled cloud");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (cloud.labels[i] == static_cast<std::uint8_t>(c)) idx.push_back(i);
  return idx;
}

}  // namespace

ScrewClusters locate_screws(const PointCloud& cloud, const LocateParams& params) {
  if (!(params.eps > 0.0) || params.min_pts < 1) throw ValidationError("need eps > 0 and min_pts >= 1");
  if (!(params.up.norm() > 0.0)) throw ValidationError("up axis must be non-zero");
  ScrewClusters out;
  out.screw_points = with_label(cloud, Category::screw);
  if (out.screw_points.empty()) {
    out.status = Status::no_screw_points;
    out.warnings.push_back("no screw-labelled points");
    return out;
  }
  std::vector<Vec3> pts;
  pts.reserve(out.screw_points.size());
  for (auto i : out.screw_points) pts.push_back(cloud.points[i]);
  out.labels = core::dbscan(pts, params.eps, params.min_pts);
  const auto k = static_cast<std::size_t>(out.labels.num_clusters);
  if (k == 0) {
    out.status = Status::no_clusters;
    out.warnings.push_back("every screw-labelled point is DBSCAN noise");
    return out;
  }
  out.centers.assign(k, Vec3::Zero());
  out.sizes.assign(k, 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const int c = out.labels.assignment[i];
    if (c < 0) continue;
    out.centers[static_cast<std::size_t>(c)] += pts[i];
    ++out.sizes[static_cast<std::size_t>(c)];
  }
  for (std::size_t c = 0; c < k; ++c) out.centers[c] /= static_cast<double>(out.sizes[c]);
  if (k == 1) {
    out.warnings.push_back("single screw cluster; reported as a cover screw");
    return out;
  }
  const Vec3 up = params.up.normalized();
  std::size_t low = 0;
  for (std::size_t c = 1; c < k; ++c)
    if (out.centers[c].dot(up) < out.centers[low].dot(up)) low = c;
  out.side = low;
  return out;
}

Orientation screw_orientation(const PointCloud& cloud, const OrientationParams& params) {
  if (!(params.eps_n > 0.0) || params.min_pts_n < 1 || params.normal_k < 3 || !(params.refine_radius >= 0.0))
    throw ValidationError("need eps_n > 0, min_pts_n >= 1, normal_k >= 3 and refine_radius >= 0");
  const auto idx = with_label(cloud, Category::cover);
  if (idx.size() < params.normal_k)
    throw ValidationError("need at least " + std::to_string(params.normal_k) + " cover points, got " +
                          std::to_string(idx.size()));
  std::vector<Vec3> pts;
  pts.reserve(idx.size());
  for (auto i : idx) pts.push_back(cloud.points[i]);
  const auto normals = core::estimate_normals(pts, params.normal_k, params.viewpoint).normals;
  const auto clusters = core::dbscan(normals, params.eps_n, params.min_pts_n);

  Orientation o;
  o.cover_points = pts.size();
  o.clusters = clusters.num_clusters;
  Vec3 sum = Vec3::Zero();
  if (clusters.num_clusters == 0) {
    o.low_confidence = true;
    for (const auto& n : normals) sum += n;
    o.cluster_size = normals.size();
  } else {
    const auto sizes = clusters.cluster_sizes();
    const auto best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    for (std::size_t i = 0; i < normals.size(); ++i)
      if (clusters.assignment[i] == best) sum += normals[i];
    o.cluster_size = sizes[static_cast<std::size_t>(best)];
  }
  if (!(sum.norm() > 0.0)) {
    o.low_confidence = true;
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : pts) centroid += p;
    sum = params.viewpoint - centroid / static_cast<double>(pts.size());
    if (!(sum.norm() > 0.0)) sum = Vec3::UnitZ();
  }
  o.direction = sum.normalized();
  if (params.refine_radius > 0.0 && !o.low_confidence) {
    for (int iter = 0; iter < 50; ++iter) {
      Vec3 next = Vec3::Zero();
      std::size_t support = 0;
      for (const auto& n : normals)
        if ((n - o.direction).norm() <= params.refine_radius) {
          next += n;
          ++support;
        }
      if (support == 0 || !(next.norm() > 0.0)) break;
      const Vec3 d = next.normalized();
      o.refined_support = support;
      const bool settled = (d - o.direction).norm() < 1e-12;
      o.direction = d;
      if (settled) break;
    }
  }
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  if (o.direction.dot(params.viewpoint - centroid) < 0.0) o.direction = -o.direction;
  return o;
}

ScrewReport build_report(const PointCloud& cloud, const LocateParams& locate, const OrientationParams& orient) {
  ScrewReport r;
  r.locate = locate;
  r.orient = orient;
  const auto clusters = locate_screws(cloud, locate);
  r.status = clusters.status;
  r.warnings = clusters.warnings;
  for (std::size_t c = 0; c < clusters.centers.size(); ++c) {
    if (clusters.side && *clusters.side == c) {
      r.side_screw_center = clusters.centers[c];
      r.side_cluster_size = clusters.sizes[c];
    } else {
      r.cover_screw_centers.push_back(clusters.centers[c]);
      r.cover_cluster_sizes.push_back(clusters.sizes[c]);
    }
  }
  try {
    r.orientation = screw_orientation(cloud, orient);
    if (r.orientation->low_confidence) r.warnings.push_back("orientation from all cover normals (low confidence)");
  } catch (const ValidationError& e) {
    r.warnings.push_back(std::string("no orientation: ") + e.what());
  }
  return r;
}

ReportEvaluation evaluate_report(const ScrewReport& report, const synthgen::SceneManifest& manifest,
                                 double threshold_factor) {
  const auto& gt = manifest.cover_screw_centers;
  const auto& radii = manifest.cover_screw_radii;
  if (radii.size() != gt.size()) throw ValidationError("manifest screw centres and radii differ in length");
  const auto& rep = report.cover_screw_centers;
  struct Pair {
    double d;
    std::size_t g, r;
  };
  std::vector<Pair> pairs;
  for (std::size_t g = 0; g < gt.size(); ++g)
    for (std::size_t r = 0; r < rep.size(); ++r) {
      const double d = (gt[g] - rep[r]).norm();
      if (d <= threshold_factor * radii[g]) pairs.push_back({d, g, r});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(a.d, a.g, a.r) < std::tie(b.d, b.g, b.r);
  });
  std::vector<bool> gt_used(gt.size(), false), rep_used(rep.size(), false);
  ReportEvaluation e;
  for (const auto& p : pairs) {
    if (gt_used[p.g] || rep_used[p.r]) continue;
    gt_used[p.g] = rep_used[p.r] = true;
    e.center_errors.push_back(p.d);
    e.max_center_error_ratio = std::max(e.max_center_error_ratio, p.d / radii[p.g]);
    ++e.matched;
  }
  e.missed = gt.size() - e.matched;
  e.spurious = rep.size() - e.matched;
  if (report.orientation) {
    const double c = std::min(1.0, std::abs(report.orientation->direction.dot(manifest.screw_orientation.normalized())));
    e.angular_error_deg = rad2deg(std::acos(c));
  } else {
    e.angular_error_deg = std::numeric_limits<double>::quiet_NaN();
  }
  return e;
}

void to_json(nlohmann::json& j, const ScrewReport& r) {
  j = nlohmann::json::object();
  j["status"] = to_string(r.status);
  j["cover_screw_centers"] = r.cover_screw_centers;
  j["cover_cluster_sizes"] = r.cover_cluster_sizes;
  j["side_screw_center"] = r.side_screw_center ? nlohmann::json(*r.side_screw_center) : nlohmann::json(nullptr);
  j["side_cluster_size"] = r.side_cluster_size;
  if (r.orientation) {
    j["orientation"] = r.orientation->direction;
    j["orientation_low_confidence"] = r.orientation->low_confidence;
    j["orientation_cluster_size"] = r.orientation->cluster_size;
    j["cover_points"] = r.orientation->cover_points;
  } else {
    j["orientation"] = nullptr;
  }
  j["parameters"] = {{"eps", r.locate.eps},           {"min_pts", r.locate.min_pts},
                     {"up", r.locate.up},             {"normal_k", r.orient.normal_k},
                     {"eps_n", r.orient.eps_n},       {"min_pts_n", r.orient.min_pts_n},
                     {"refine_radius", r.orient.refine_radius},
                     {"viewpoint", r.orient.viewpoint}};
  j["warnings"] = r.warnings;
}

void to_json(nlohmann::json& j, const ReportEvaluation& e) {
  j = {{"center_errors_m", e.center_errors},
       {"matched", e.matched},
       {"missed", e.missed},
       {"spurious", e.spurious},
       {"max_center_error_ratio", e.max_center_error_ratio},
       {"angular_error_deg", std::isnan(e.angular_error_deg) ? nlohmann::json(nullptr) : nlohmann::json(e.angular_error_deg)}};
}

}  // namespace motorseg::postprocess
