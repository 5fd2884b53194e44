#pragma once

#include "motorseg/common.hpp"

#include <string>
#include <vector>

namespace motorseg::synthgen {

struct Triangle {
  Vec3 a, b, c;
  std::uint8_t label = 0;
  std::uint32_t group = 0;

  double area() const { return 0.5 * (b - a).cross(c - a).norm(); }
  Vec3 centroid() const { return (a + b + c) / 3.0; }
};

enum class PrimitiveKind { box, cylinder, quad };

/// One watertight primitive (or the open panel quad) in a triangle soup.
struct PrimitiveGroup {
  std::string name;
  std::uint8_t label = 0;
  PrimitiveKind kind = PrimitiveKind::box;
};

/// Axis-aligned box by centre and half extents.
struct Box {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Constant(0.5);

  Vec3 min() const { return center - half_extents; }
  Vec3 max() const { return center + half_extents; }
};

/// Labeled triangle soup. `groups[t.group]` describes the primitive a triangle
/// belongs to.
struct TriangleSet {
  std::vector<Triangle> triangles;
  std::vector<PrimitiveGroup> groups;

  std::uint32_t add_group(std::string name, std::uint8_t label, PrimitiveKind kind);
  void add_box(const Box& box, const Mat3& rotation, std::uint8_t label, std::string name);
  /// Closed cylinder from `base` along unit `axis`.
  void add_cylinder(const Vec3& base, const Vec3& axis, double radius, double height, int segments,
                    std::uint8_t label, std::string name);
  /// Single-sided rectangle with the given outward normal.
  void add_quad(const Vec3& center, const Vec3& u_half, const Vec3& v_half, std::uint8_t label,
                std::string name);

  /// Appends `other` mapped through `pose`, keeping group structure.
  void append(const TriangleSet& other, const RigidTransform& pose = {});

  std::array<double, kNumCategories> area_by_label() const;
  std::vector<std::uint32_t> groups_with_label(std::uint8_t label) const;
  /// Axis-aligned bounds of all triangles carrying `label`.
  std::pair<Vec3, Vec3> bounds(std::uint8_t label) const;
  std::pair<Vec3, Vec3> bounds() const;
};

/// Segment/ray queries against a triangle set through a bounding volume
/// hierarchy. The triangle set must outlive the caster.
class RayCaster {
 public:
  explicit RayCaster(const TriangleSet& mesh);

  /// True when some triangle is hit at parameter t in (t_min, t_max) along
  /// origin + t * dir.
  bool occluded(const Vec3& origin, const Vec3& dir, double t_min, double t_max) const;

  /// Nearest hit parameter in (t_min, t_max), or a negative value.
  double first_hit(const Vec3& origin, const Vec3& dir, double t_min, double t_max) const;

 private:
  struct Node {
    Eigen::Vector3f lo, hi;
    std::uint32_t first = 0;  // left child, or first triangle of a leaf
    std::uint32_t right = 0;
    std::uint32_t count = 0;  // 0 for interior nodes
  };
  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  template <bool AnyHit>
  double traverse(const Vec3& origin, const Vec3& dir, double t_min, double t_max) const;

  const TriangleSet& mesh_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  // precomputed per triangle (in BVH order): v0, e1, e2
  std::vector<Vec3> v0_, e1_, e2_;
};

/// Möller–Trumbore; returns t or a negative value when missed.
double intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& v0, const Vec3& e1,
                          const Vec3& e2);

}  // namespace motorseg::synthgen
