#include "motorseg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace motorseg::synthgen {

std::uint32_t TriangleSet::add_group(std::string name, std::uint8_t label, PrimitiveKind kind) {
  groups.push_back({std::move(name), label, kind});
  return static_cast<std::uint32_t>(groups.size() - 1);
}

void TriangleSet::add_box(const Box& box, const Mat3& rotation, std::uint8_t label, std::string name) {
  const auto g = add_group(std::move(name), label, PrimitiveKind::box);
  const Vec3& h = box.half_extents;
  auto corner = [&](int i) {
    const Vec3 local((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z());
    return Vec3(box.center + rotation * local);
  };
  // faces as corner quads, counter-clockwise seen from outside
  static constexpr int faces[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4},
                                      {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& f : faces) {
    triangles.push_back({corner(f[0]), corner(f[1]), corner(f[2]), label, g});
    triangles.push_back({corner(f[0]), corner(f[2]), corner(f[3]), label, g});
  }
}

void TriangleSet::add_cylinder(const Vec3& base, const Vec3& axis, double radius, double height,
                               int segments, std::uint8_t label, std::string name) {
  const auto g = add_group(std::move(name), label, PrimitiveKind::cylinder);
  const Vec3 w = axis.normalized();
  const Vec3 helper = std::abs(w.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  const Vec3 u = w.cross(helper).normalized();
  const Vec3 v = w.cross(u);
  const Vec3 top = base + w * height;
  auto rim = [&](const Vec3& c, int i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i % segments) / segments;
    return Vec3(c + radius * (std::cos(a) * u + std::sin(a) * v));
  };
  for (int i = 0; i < segments; ++i) {
    const Vec3 b0 = rim(base, i), b1 = rim(base, i + 1);
    const Vec3 t0 = rim(top, i), t1 = rim(top, i + 1);
    triangles.push_back({b0, b1, t1, label, g});
    triangles.push_back({b0, t1, t0, label, g});
    triangles.push_back({top, t0, t1, label, g});
    triangles.push_back({base, b1, b0, label, g});
  }
}

void TriangleSet::add_quad(const Vec3& center, const Vec3& u_half, const Vec3& v_half,
                           std::uint8_t label, std::string name) {
  const auto g = add_group(std::move(name), label, PrimitiveKind::quad);
  const Vec3 p0 = center - u_half - v_half, p1 = center + u_half - v_half;
  const Vec3 p2 = center + u_half + v_half, p3 = center - u_half + v_half;
  triangles.push_back({p0, p1, p2, label, g});
  triangles.push_back({p0, p2, p3, label, g});
}

void TriangleSet::append(const TriangleSet& other, const RigidTransform& pose) {
  const auto offset = static_cast<std::uint32_t>(groups.size());
  groups.insert(groups.end(), other.groups.begin(), other.groups.end());
  triangles.reserve(triangles.size() + other.triangles.size());
  for (const auto& t : other.triangles)
    triangles.push_back({pose.apply(t.a), pose.apply(t.b), pose.apply(t.c), t.label, t.group + offset});
}

std::array<double, kNumCategories> TriangleSet::area_by_label() const {
  std::array<double, kNumCategories> a{};
  for (const auto& t : triangles)
    if (t.label < kNumCategories) a[t.label] += t.area();
  return a;
}

std::vector<std::uint32_t> TriangleSet::groups_with_label(std::uint8_t label) const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t g = 0; g < groups.size(); ++g)
    if (groups[g].label == label) out.push_back(g);
  return out;
}

std::pair<Vec3, Vec3> TriangleSet::bounds(std::uint8_t label) const {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
  for (const auto& t : triangles) {
    if (t.label != label) continue;
    for (const Vec3* p : {&t.a, &t.b, &t.c}) {
      lo = lo.cwiseMin(*p);
      hi = hi.cwiseMax(*p);
    }
  }
  return {lo, hi};
}

std::pair<Vec3, Vec3> TriangleSet::bounds() const {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
  for (const auto& t : triangles)
    for (const Vec3* p : {&t.a, &t.b, &t.c}) {
      lo = lo.cwiseMin(*p);
      hi = hi.cwiseMax(*p);
    }
  return {lo, hi};
}

// ---------------------------------------------------------------------------

double intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& v0, const Vec3& e1,
                          const Vec3& e2) {
  const Vec3 p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-18) return -1.0;
  const double inv = 1.0 / det;
  const Vec3 s = origin - v0;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return -1.0;
  const Vec3 q = s.cross(e1);
  const double v = dir.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return -1.0;
  return e2.dot(q) * inv;
}

RayCaster::RayCaster(const TriangleSet& mesh) : mesh_(mesh) {
  const auto n = static_cast<std::uint32_t>(mesh.triangles.size());
  order_.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) order_[i] = i;
  nodes_.reserve(2 * static_cast<std::size_t>(n) + 1);
  if (n > 0) build(0, n);
  v0_.resize(n);
  e1_.resize(n);
  e2_.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto& t = mesh.triangles[order_[i]];
    v0_[i] = t.a;
    e1_[i] = t.b - t.a;
    e2_[i] = t.c - t.a;
  }
}

std::uint32_t RayCaster::build(std::uint32_t begin, std::uint32_t end) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
  Vec3 clo = lo, chi = hi;
  for (std::uint32_t i = begin; i < end; ++i) {
    const auto& t = mesh_.triangles[order_[i]];
    for (const Vec3* p : {&t.a, &t.b, &t.c}) {
      lo = lo.cwiseMin(*p);
      hi = hi.cwiseMax(*p);
    }
    const Vec3 c = t.centroid();
    clo = clo.cwiseMin(c);
    chi = chi.cwiseMax(c);
  }
  // pad so float rounding never shrinks a box
  const Vec3 pad = Vec3::Constant(1e-6) + 1e-6 * lo.cwiseAbs().cwiseMax(hi.cwiseAbs());
  nodes_[index].lo = (lo - pad).cast<float>();
  nodes_[index].hi = (hi + pad).cast<float>();

  if (end - begin <= 4) {
    nodes_[index].first = begin;
    nodes_[index].count = end - begin;
    return index;
  }
  int axis = 0;
  const Vec3 ext = chi - clo;
  if (ext.y() > ext[axis]) axis = 1;
  if (ext.z() > ext[axis]) axis = 2;
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return mesh_.triangles[a].centroid()[axis] < mesh_.triangles[b].centroid()[axis];
                   });
  const std::uint32_t left = build(begin, mid);
  const std::uint32_t right = build(mid, end);
  nodes_[index].first = left;
  nodes_[index].right = right;
  nodes_[index].count = 0;
  return index;
}

namespace {

inline bool slab_hit(const Eigen::Vector3f& lo, const Eigen::Vector3f& hi, const Vec3& o,
                     const Vec3& inv, double t_min, double t_max) {
  for (int a = 0; a < 3; ++a) {
    double t0 = (static_cast<double>(lo[a]) - o[a]) * inv[a];
    double t1 = (static_cast<double>(hi[a]) - o[a]) * inv[a];
    if (t0 > t1) std::swap(t0, t1);
    t_min = std::max(t_min, t0);
    t_max = std::min(t_max, t1);
    if (t_min > t_max) return false;
  }
  return true;
}

}  // namespace

bool RayCaster::occluded(const Vec3& origin, const Vec3& dir, double t_min, double t_max) const {
  return traverse<true>(origin, dir, t_min, t_max) >= 0.0;
}

double RayCaster::first_hit(const Vec3& origin, const Vec3& dir, double t_min, double t_max) const {
  return traverse<false>(origin, dir, t_min, t_max);
}

template <bool AnyHit>
double RayCaster::traverse(const Vec3& origin, const Vec3& dir, double t_min, double t_max) const {
  if (nodes_.empty()) return -1.0;
  Vec3 inv;
  for (int a = 0; a < 3; ++a)
    inv[a] = dir[a] != 0.0 ? 1.0 / dir[a] : std::numeric_limits<double>::infinity();
  std::uint32_t stack[128];
  int sp = 0;
  stack[sp++] = 0;
  double best = -1.0;
  double limit = t_max;
  while (sp > 0) {
    const Node& node = nodes_[stack[--sp]];
    if (!slab_hit(node.lo, node.hi, origin, inv, t_min, limit)) continue;
    if (node.count > 0) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const double t = intersect_triangle(origin, dir, v0_[i], e1_[i], e2_[i]);
        if (t > t_min && t < limit) {
          if constexpr (AnyHit) return t;
          best = t;
          limit = t;
        }
      }
    } else {
      stack[sp++] = node.right;
      stack[sp++] = node.first;
    }
  }
  return best;
}

}  // namespace motorseg::synthgen
