#pragma once

// Synthetic scenes: analytic shapes, simulated touches, ground-truth depth,
// sparse depth keypoints and a synthetic monocular depth map.

#include <cstdint>
#include <optional>
#include <vector>

#include "vtfuse/align.hpp"
#include "vtfuse/gpis.hpp"
#include "vtfuse/image.hpp"
#include "vtfuse/sdfrender.hpp"

namespace vtf {

enum class ShapeKind { sphere, box, torus };

struct AnalyticShape {
  ShapeKind kind = ShapeKind::sphere;
  /// sphere: (radius, -, -); box: half-extents; torus: (major, minor, -), axis = local z.
  Vec3 size = Vec3(1.0, 0.0, 0.0);
  Pose pose = Pose::Identity();

  void validate() const;
  /// Radius of a sphere about the pose origin enclosing the shape.
  double bounding_radius() const;
};

double analytic_sdf(const AnalyticShape& shape, const Vec3& p);
/// Central-difference gradient (h = 1e-6), normalized.
Vec3 sdf_normal(const AnalyticShape& shape, const Vec3& p);

/// Exact-SDF field for the sphere tracer (variance 0).
struct AnalyticField {
  const AnalyticShape* shape;
  double distance(const Vec3& p) const { return analytic_sdf(*shape, p); }
  double variance(const Vec3&) const { return 0.0; }
};

/// Object plus an optional backdrop (e.g. a floor slab); SDF is the union.
struct Scene {
  AnalyticShape object;
  std::optional<AnalyticShape> backdrop;

  double sdf(const Vec3& p) const;
  BoundingSphere bounds() const;
};

struct SceneField {
  const Scene* scene;
  double distance(const Vec3& p) const { return scene->sdf(p); }
  double variance(const Vec3&) const { return 0.0; }
};

struct NoiseModel {
  double point_sigma = 0.0;   // meters
  double normal_sigma = 0.0;  // radians
  double sparse_a = 0.0;      // 1/meters; sparse depth std = sparse_a * depth^2

  void validate() const;
};

std::vector<TouchReading> sample_touches(const AnalyticShape& shape, int n_touches, double patch_radius,
                                         int points_per_touch, const NoiseModel& noise, std::uint64_t seed);

/// Sphere-traced depth of one shape, hit_tol 1e-7; hits carry variance 0.
DepthVarImage render_gt_depth(const AnalyticShape& shape, const CameraModel& camera);

struct GtRender {
  DepthVarImage depth;
  Mask object_mask;  // 1 where the first hit lies on the object
};

GtRender render_gt_scene(const Scene& scene, const CameraModel& camera);

SparseDepth make_sparse_depth(const DepthVarImage& gt, double fraction, const NoiseModel& noise, std::uint64_t seed);

/// Parameters of the simulated monocular estimator. Its output is relative
/// depth: raw = (D' - offset) / scale with D' = GT distorted by a smooth
/// multiplicative field and an additive bias on the object.
struct MonoModel {
  double scale = 2.5;
  double offset = 0.3;
  double object_bias = 0.15;
  double distortion = 0.02;
  double far_depth = 12.0;  // reported at pixels where GT has no surface
};

ImageD make_mono_depth(const GtRender& gt, const MonoModel& mono);

/// Flat-shaded color: Lambertian object tint, checkered backdrop.
ImageRgb render_gt_rgb(const Scene& scene, const GtRender& gt, const Vec3& object_color, const Vec3& light_dir);

}  // namespace vtf
