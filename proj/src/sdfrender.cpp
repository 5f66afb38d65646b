#include "vtfuse/sdfrender.hpp"

#include <cmath>

namespace vtf {

void MarchParams::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("march alpha must lie in (0, 1]");
  if (!(dt_min > 0.0)) throw InputError("march dt_min must be positive");
  if (!(hit_tol > 0.0)) throw InputError("march hit_tol must be positive");
  if (max_steps < 0) throw InputError("march max_steps must be nonnegative");
}

MarchParams MarchParams::defaults_for(double radius) {
  MarchParams p;
  p.hit_tol = 1e-4 * radius;
  p.dt_min = 1e-3 * radius;
  return p;
}

BoundingSphere bounding_sphere(std::span<const Vec3> points, double margin_frac, double min_radius) {
  if (points.empty()) throw InputError("bounding sphere of an empty point set");
  Vec3 c = Vec3::Zero();
  for (const auto& p : points) c += p;
  c /= static_cast<double>(points.size());
  double r = 0.0;
  for (const auto& p : points) r = std::max(r, (p - c).norm());
  return {c, std::max((1.0 + margin_frac) * r, min_radius)};
}

BoundingSphere bounding_sphere(const ConditioningSet& set, double margin_frac, double min_radius) {
  const auto surface = set.surface_points();
  return bounding_sphere(surface, margin_frac, min_radius);
}

std::optional<MarchWindow> sphere_prefilter(const Ray& ray, const BoundingSphere& sphere) {
  const Vec3 oc = ray.origin - sphere.center;
  const double b = ray.direction.dot(oc);
  const double c = oc.squaredNorm() - sphere.radius * sphere.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double s = std::sqrt(disc);
  const double t1 = -b + s;
  if (t1 < 0.0) return std::nullopt;
  return MarchWindow{std::max(-b - s, 0.0), t1};
}

DepthVarImage render_depth_variance(const GpisModel& model, const CameraModel& camera, const GpisRenderOptions& opt) {
  const auto sphere = bounding_sphere(model.conditioning(), opt.margin_frac, opt.march.dt_min);
  return render_field(GpisField(model), camera, opt.march, sphere);
}

}  // namespace vtf
