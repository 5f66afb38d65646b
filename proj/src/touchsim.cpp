#include "vtfuse/touchsim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace vtf {

void AnalyticShape::validate() const {
  switch (kind) {
    case ShapeKind::sphere:
      if (!(size.x() > 0.0)) throw InputError("sphere radius must be positive");
      break;
    case ShapeKind::box:
      if (!(size.minCoeff() > 0.0)) throw InputError("box half-extents must be positive");
      break;
    case ShapeKind::torus:
      if (!(size.x() > 0.0 && size.y() > 0.0)) throw InputError("torus radii must be positive");
      break;
  }
}

double AnalyticShape::bounding_radius() const {
  switch (kind) {
    case ShapeKind::sphere:
      return size.x();
    case ShapeKind::box:
      return size.norm();
    case ShapeKind::torus:
      return size.x() + size.y();
  }
  return 0.0;
}

double analytic_sdf(const AnalyticShape& shape, const Vec3& p) {
  const Vec3 l = shape.pose.inverse() * p;
  switch (shape.kind) {
    case ShapeKind::sphere:
      return l.norm() - shape.size.x();
    case ShapeKind::box: {
      const Vec3 q = l.cwiseAbs() - shape.size;
      return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
    }
    case ShapeKind::torus: {
      const double ring = std::hypot(l.x(), l.y()) - shape.size.x();
      return std::hypot(ring, l.z()) - shape.size.y();
    }
  }
  return 0.0;
}

Vec3 sdf_normal(const AnalyticShape& shape, const Vec3& p) {
  constexpr double h = 1e-6;
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    Vec3 e = Vec3::Zero();
    e[i] = h;
    g[i] = (analytic_sdf(shape, p + e) - analytic_sdf(shape, p - e)) / (2.0 * h);
  }
  const double n = g.norm();
  if (!(n > 0.0)) throw NumericalError("SDF gradient vanished; point on a medial axis");
  return g / n;
}

double Scene::sdf(const Vec3& p) const {
  const double d = analytic_sdf(object, p);
  return backdrop ? std::min(d, analytic_sdf(*backdrop, p)) : d;
}

BoundingSphere Scene::bounds() const {
  BoundingSphere s{object.pose.translation(), object.bounding_radius()};
  if (backdrop) {
    const Vec3 c2 = backdrop->pose.translation();
    const double r2 = backdrop->bounding_radius();
    const double d = (c2 - s.center).norm();
    if (d + s.radius <= r2) {
      s = {c2, r2};
    } else if (d + r2 > s.radius) {
      const double r = 0.5 * (d + s.radius + r2);
      const Vec3 dir = d > 0.0 ? Vec3((c2 - s.center) / d) : Vec3::UnitX();
      s.center = s.center + (r - s.radius) * dir;
      s.radius = r;
    }
  }
  s.radius *= 1.01;
  return s;
}

void NoiseModel::validate() const {
  if (!(point_sigma >= 0.0 && normal_sigma >= 0.0 && sparse_a >= 0.0))
    throw InputError("noise parameters must be nonnegative");
}

std::vector<TouchReading> sample_touches(const AnalyticShape& shape, int n_touches, double patch_radius,
                                         int points_per_touch, const NoiseModel& noise, std::uint64_t seed) {
  shape.validate();
  noise.validate();
  if (n_touches < 1) throw InputError("need at least one touch");
  if (points_per_touch < 1) throw InputError("need at least one point per touch");
  if (!(patch_radius >= 0.0)) throw InputError("patch radius must be nonnegative");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto random_unit = [&] {
    Vec3 v;
    do {
      v = Vec3(gauss(rng), gauss(rng), gauss(rng));
    } while (v.norm() < 1e-12);
    return Vec3(v.normalized());
  };
  auto project = [&](Vec3 p, int iters) {
    for (int i = 0; i < iters; ++i) {
      const double d = analytic_sdf(shape, p);
      if (std::abs(d) < 1e-12) break;
      p -= d * sdf_normal(shape, p);
    }
    return p;
  };

  const Vec3 center = shape.pose.translation();
  const double reach = 2.0 * shape.bounding_radius();
  std::vector<TouchReading> touches;
  touches.reserve(n_touches);
  for (int t = 0; t < n_touches; ++t) {
    const Vec3 contact = project(center + reach * random_unit(), 50);
    const Vec3 n0 = sdf_normal(shape, contact);
    const Vec3 t1 = n0.unitOrthogonal();
    const Vec3 t2 = n0.cross(t1);

    TouchReading touch;
    touch.sensor_pose = Pose::Identity();
    touch.sensor_pose.translation() = contact;
    touch.sensor_pose.linear().col(2) = -n0;
    touch.sensor_pose.linear().col(0) = t1;
    touch.sensor_pose.linear().col(1) = (-n0).cross(t1);
    touch.points.reserve(points_per_touch);
    touch.normals.reserve(points_per_touch);
    for (int k = 0; k < points_per_touch; ++k) {
      const double r = patch_radius * std::sqrt(unif(rng));
      const double th = 2.0 * std::numbers::pi * unif(rng);
      Vec3 q = contact + r * (std::cos(th) * t1 + std::sin(th) * t2);
      q = project(q, 1);
      Vec3 n = sdf_normal(shape, q);
      if (noise.point_sigma > 0.0) q += noise.point_sigma * Vec3(gauss(rng), gauss(rng), gauss(rng));
      if (noise.normal_sigma > 0.0) {
        Vec3 axis = n.cross(random_unit());
        if (axis.norm() < 1e-9) axis = n.unitOrthogonal();
        n = (Eigen::AngleAxisd(noise.normal_sigma * gauss(rng), axis.normalized()) * n).normalized();
      }
      touch.points.push_back(q);
      touch.normals.push_back(n);
    }
    touches.push_back(std::move(touch));
  }
  return touches;
}

namespace {

MarchParams gt_march_params() {
  MarchParams p;
  p.alpha = 1.0;
  p.hit_tol = 1e-7;
  p.dt_min = 1e-7;
  p.max_steps = 4000;
  return p;
}

}  // namespace

DepthVarImage render_gt_depth(const AnalyticShape& shape, const CameraModel& camera) {
  shape.validate();
  const BoundingSphere sphere{shape.pose.translation(), 1.01 * shape.bounding_radius()};
  DepthVarImage img = render_field(AnalyticField{&shape}, camera, gt_march_params(), sphere);
  for (size_t i = 0; i < img.depth.size(); ++i)
    if (img.is_hit(i)) img.variance[i] = 0.0;
  return img;
}

GtRender render_gt_scene(const Scene& scene, const CameraModel& camera) {
  camera.validate();
  scene.object.validate();
  if (scene.backdrop) scene.backdrop->validate();
  GtRender out{DepthVarImage(camera), Mask(camera.width, camera.height, 0)};
  const BoundingSphere sphere = scene.bounds();
  const MarchParams params = gt_march_params();
  const Mat3 world_to_cam = camera.pose.linear().transpose();
  const SceneField field{&scene};
  for (int y = 0; y < camera.height; ++y)
    for (int x = 0; x < camera.width; ++x) {
      const Ray ray = generate_ray(camera, x, y);
      const auto window = sphere_prefilter(ray, sphere);
      if (!window) continue;
      const auto hit = march(field, ray, params, *window);
      if (!hit) continue;
      const double z = hit->t * (world_to_cam * ray.direction).z();
      if (!(z > 0.0)) continue;
      out.depth.depth(x, y) = z;
      out.depth.variance(x, y) = 0.0;
      const Vec3 p = ray.at(hit->t);
      const bool on_object = !scene.backdrop || analytic_sdf(scene.object, p) <= analytic_sdf(*scene.backdrop, p);
      out.object_mask(x, y) = on_object ? 1 : 0;
    }
  return out;
}

SparseDepth make_sparse_depth(const DepthVarImage& gt, double fraction, const NoiseModel& noise, std::uint64_t seed) {
  noise.validate();
  if (!(fraction > 0.0 && fraction <= 0.01)) throw InputError("sparse fraction must lie in (0, 0.01]");
  std::vector<size_t> hits;
  for (size_t i = 0; i < gt.depth.size(); ++i)
    if (gt.is_hit(i)) hits.push_back(i);
  if (hits.empty()) throw InputError("ground-truth depth has no hit pixels");
  const auto count = static_cast<size_t>(std::llround(fraction * static_cast<double>(hits.size())));
  if (count == 0) throw InputError("sparse fraction selects no samples");

  std::mt19937_64 rng(seed);
  for (size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<size_t> pick(i, hits.size() - 1);
    std::swap(hits[i], hits[pick(rng)]);
  }
  hits.resize(count);
  std::sort(hits.begin(), hits.end());

  std::normal_distribution<double> gauss(0.0, 1.0);
  SparseDepth out;
  out.source = SparseSource::synthetic;
  out.samples.reserve(count);
  const int w = gt.width();
  for (size_t idx : hits) {
    const double d = gt.depth[idx];
    const double sd = noise.sparse_a * d * d;
    double noisy = d;
    if (sd > 0.0) {
      do {
        noisy = d + sd * gauss(rng);
      } while (!(noisy > 0.0));
    }
    out.samples.push_back({static_cast<int>(idx % w), static_cast<int>(idx / w), noisy});
  }
  return out;
}

ImageD make_mono_depth(const GtRender& gt, const MonoModel& mono) {
  if (!(mono.scale > 0.0)) throw InputError("mono scale must be positive");
  const int w = gt.depth.width();
  const int h = gt.depth.height();
  ImageD raw(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double d = mono.far_depth;
      if (gt.depth.depth(x, y) > 0.0) {
        const double warp = 1.0 + mono.distortion * std::sin(2.0 * std::numbers::pi * x / w) *
                                      std::cos(2.0 * std::numbers::pi * y / h);
        d = gt.depth.depth(x, y) * warp + (gt.object_mask(x, y) != 0 ? mono.object_bias : 0.0);
      }
      raw(x, y) = std::max((d - mono.offset) / mono.scale, 1e-3);
    }
  return raw;
}

ImageRgb render_gt_rgb(const Scene& scene, const GtRender& gt, const Vec3& object_color, const Vec3& light_dir) {
  const CameraModel& cam = gt.depth.camera;
  const Vec3 sky(0.1, 0.1, 0.15);
  const Vec3 l = light_dir.normalized();
  ImageRgb rgb(cam.width, cam.height, sky);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const double z = gt.depth.depth(x, y);
      if (!(z > 0.0)) continue;
      const Vec3 p = backproject(cam, x, y, z);
      if (gt.object_mask(x, y) != 0) {
        const double lambert = std::max(0.0, sdf_normal(scene.object, p).dot(l));
        rgb(x, y) = object_color * (0.25 + 0.75 * lambert);
      } else {
        const auto cx = static_cast<long>(std::floor(p.x() / 0.5));
        const auto cy = static_cast<long>(std::floor(p.y() / 0.5));
        const double g = ((cx + cy) & 1) != 0 ? 0.65 : 0.35;
        rgb(x, y) = Vec3(g, g, g * 0.9);
      }
    }
  return rgb;
}

}  // namespace vtf
