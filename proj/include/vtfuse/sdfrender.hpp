#pragma once

// Sphere tracing of signed distance fields (GP-backed or analytic) into
// z-depth / variance images.

#include <algorithm>
#include <concepts>
#include <limits>
#include <span>
#include <optional>
#include <vector>

#include "vtfuse/camera.hpp"
#include "vtfuse/gpis.hpp"
#include "vtfuse/image.hpp"

namespace vtf {

template <class F>
concept SdfField = requires(const F& f, const Vec3& p) {
  { f.distance(p) } -> std::convertible_to<double>;
  { f.variance(p) } -> std::convertible_to<double>;
};

/// GP posterior mean as the distance, posterior variance at hits.
class GpisField {
 public:
  explicit GpisField(const GpisModel& model) : model_(&model) {}
  double distance(const Vec3& p) const { return model_->mean(p); }
  double variance(const Vec3& p) const { return model_->predict(p).variance; }

 private:
  const GpisModel* model_;
};

struct MarchParams {
  double alpha = 0.9;     // step fraction of the SDF value
  double dt_min = 1e-3;   // minimum step, meters
  double hit_tol = 1e-4;  // SDF threshold for a hit, meters
  int max_steps = 200;
  double t_max = std::numeric_limits<double>::infinity();  // clipped further by the window exit

  void validate() const;
  /// hit_tol = 1e-4 r, dt_min = 1e-3 r for an object of bounding radius r.
  static MarchParams defaults_for(double radius);
};

struct BoundingSphere {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};

struct MarchWindow {
  double enter = 0.0;
  double exit = 0.0;
};

struct MarchHit {
  double t;
  double variance;
  int steps;
};

/// Centroid of the surface points, radius (1 + margin) * max distance,
/// floored at `min_radius`.
BoundingSphere bounding_sphere(const ConditioningSet& set, double margin_frac, double min_radius);
BoundingSphere bounding_sphere(std::span<const Vec3> points, double margin_frac, double min_radius);

/// Ray/sphere intersection interval clipped to t >= 0.
std::optional<MarchWindow> sphere_prefilter(const Ray& ray, const BoundingSphere& sphere);

/// Sphere tracing: t += max(alpha * sdf, dt_min) until sdf < hit_tol (hit),
/// t leaves the window, or max_steps is exceeded (miss). `trace` receives the
/// t value at every evaluated position when non-null.
template <SdfField F>
std::optional<MarchHit> march(const F& field, const Ray& ray, const MarchParams& params, const MarchWindow& window,
                              std::vector<double>* trace = nullptr) {
  const double t_end = std::min(window.exit, params.t_max);
  double t = window.enter;
  int steps = 0;
  while (t <= t_end) {
    if (trace != nullptr) trace->push_back(t);
    const Vec3 p = ray.at(t);
    const double sdf = field.distance(p);
    if (sdf < params.hit_tol) return MarchHit{t, field.variance(p), steps};
    if (steps >= params.max_steps) return std::nullopt;
    t += std::max(params.alpha * sdf, params.dt_min);
    ++steps;
  }
  return std::nullopt;
}

/// Per-pixel prefilter + march. Hits store t * (camera-frame ray z), misses
/// store the sentinels. Pixels are independent; output is order-free.
template <SdfField F>
DepthVarImage render_field(const F& field, const CameraModel& camera, const MarchParams& params,
                           const BoundingSphere& sphere) {
  camera.validate();
  params.validate();
  DepthVarImage img(camera);
  const Mat3 world_to_cam = camera.pose.linear().transpose();
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const Ray ray = generate_ray(camera, x, y);
      const auto window = sphere_prefilter(ray, sphere);
      if (!window) continue;
      const auto hit = march(field, ray, params, *window);
      if (!hit) continue;
      const double dz = (world_to_cam * ray.direction).z();
      const double z = hit->t * dz;
      if (!(z > 0.0)) continue;
      img.depth(x, y) = z;
      img.variance(x, y) = hit->variance;
    }
  }
  return img;
}

struct GpisRenderOptions {
  MarchParams march;
  double margin_frac = 0.1;
};

DepthVarImage render_depth_variance(const GpisModel& model, const CameraModel& camera, const GpisRenderOptions& opt);

}  // namespace vtf
