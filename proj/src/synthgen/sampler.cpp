#include "motorseg/synthgen.hpp"

#include <cmath>

namespace motorseg::synthgen {

SampleResult sample_scene(const TriangleSet& scene, const SceneSpec& spec, std::uint64_t seed) {
  if (!(spec.sample_density > 0.0)) throw ValidationError("sample_density must be > 0");
  if (!(spec.noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be >= 0");
  const RayCaster caster(scene);
  const Vec3 cam = spec.camera_position();
  Rng rng(seed);
  SampleResult out;
  constexpr double kTolerance = 1e-4;
  for (const auto& tri : scene.triangles) {
    const std::uint64_t n = rng.poisson(spec.sample_density * tri.area());
    for (std::uint64_t k = 0; k < n; ++k) {
      const double s = std::sqrt(rng.uniform(0.0, 1.0));
      const double r = rng.uniform(0.0, 1.0);
      const Vec3 p = (1.0 - s) * tri.a + s * (1.0 - r) * tri.b + s * r * tri.c;
      const double noise = spec.noise_sigma > 0 ? rng.normal(spec.noise_sigma) : 0.0;
      ++out.candidates;
      const Vec3 dir = p - cam;
      const double len = dir.norm();
      if (!(len > kTolerance)) continue;
      if (caster.occluded(cam, dir, 1e-9, 1.0 - kTolerance / len)) continue;
      out.cloud.points.push_back(p + (noise / len) * dir);
      out.cloud.labels.push_back(tri.label);
    }
  }
  if (out.cloud.empty()) out.warnings.push_back("no surface point is visible from the camera");
  return out;
}

}  // namespace motorseg::synthgen
