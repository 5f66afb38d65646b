#include <doctest.h>

#include <cmath>
#include <random>

#include "vtfuse/sdfrender.hpp"
#include "vtfuse/touchsim.hpp"

using namespace vtf;

namespace {

CameraModel small_camera(int w = 16, int h = 12) {
  CameraModel c;
  c.width = w;
  c.height = h;
  c.fx = c.fy = 20.0;
  c.cx = 0.5 * (w - 1);
  c.cy = 0.5 * (h - 1);
  return c;
}

AnalyticShape unit_sphere() { return AnalyticShape{}; }

}  // namespace

TEST_CASE("principal point ray looks down the optical axis") {
  CameraModel c = small_camera();
  const Ray r = generate_ray(c, c.cx, c.cy);
  CHECK((r.direction - Vec3(0, 0, 1)).norm() < 1e-15);
  CHECK(r.origin == Vec3::Zero());
}

TEST_CASE("one focal length to the right gives a 45 degree ray") {
  CameraModel c = small_camera(64, 64);
  const Ray r = generate_ray(c, c.cx + c.fx, c.cy);
  CHECK((r.direction - Vec3(1, 0, 1).normalized()).norm() < 1e-15);
}

TEST_CASE("rotated pose rotates the ray") {
  CameraModel c = small_camera();
  const Ray r0 = generate_ray(c, 3.0, 7.0);
  c.pose.linear() = Eigen::AngleAxisd(1.1, Vec3(0.3, -0.5, 0.8).normalized()).toRotationMatrix();
  c.pose.translation() = Vec3(1, 2, 3);
  const Ray r1 = generate_ray(c, 3.0, 7.0);
  CHECK((r1.direction - c.pose.linear() * r0.direction).norm() < 1e-12);
  CHECK(r1.origin == Vec3(1, 2, 3));
  CHECK(std::abs(r1.direction.norm() - 1.0) < 1e-12);
}

TEST_CASE("out-of-bounds pixels are rejected") {
  const CameraModel c = small_camera();
  CHECK_THROWS_AS(generate_ray(c, -0.6, 0.0), InputError);
  CHECK_THROWS_AS(generate_ray(c, 0.0, c.height - 0.5), InputError);
  CHECK_NOTHROW(generate_ray(c, -0.5, -0.5));
}

TEST_CASE("project and backproject are inverse") {
  CameraModel c = small_camera();
  c.pose = look_at(Vec3(3, -2, 1), Vec3::Zero(), Vec3::UnitZ());
  const Vec3 p = backproject(c, 4.25, 9.5, 2.75);
  const auto px = project(c, p);
  REQUIRE(px);
  CHECK(px->u == doctest::Approx(4.25).epsilon(1e-12));
  CHECK(px->v == doctest::Approx(9.5).epsilon(1e-12));
  CHECK(px->z == doctest::Approx(2.75).epsilon(1e-12));
  CHECK_FALSE(project(c, c.position() - c.optical_axis()));
}

TEST_CASE("invalid cameras fail validation") {
  CameraModel c = small_camera();
  c.fx = 0.0;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = small_camera();
  c.pose.linear() *= 1.01;
  CHECK_THROWS_AS(c.validate(), InputError);
}

TEST_CASE("bounding sphere examples") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<Vec3> pts;
  for (int i = 0; i < 2000; ++i) pts.push_back(Vec3(g(rng), g(rng), g(rng)).normalized());
  const auto b = bounding_sphere(pts, 0.1, 1e-3);
  CHECK(b.center.norm() < 0.05);
  CHECK(b.radius >= 1.0);
  CHECK(b.radius <= 1.15);
  for (const auto& p : pts) CHECK((p - b.center).norm() <= b.radius);

  const std::vector<Vec3> one{Vec3(1, 2, 3)};
  CHECK(bounding_sphere(one, 0.1, 1e-3).radius == 1e-3);
  const std::vector<Vec3> two{Vec3(1, 0, 0), Vec3(-1, 0, 0)};
  const auto t = bounding_sphere(two, 0.1, 1e-3);
  CHECK(t.center.norm() < 1e-15);
  CHECK(t.radius == doctest::Approx(1.1));
}

TEST_CASE("sphere prefilter intervals") {
  const BoundingSphere s{Vec3::Zero(), 1.5};
  auto w = sphere_prefilter(Ray{Vec3::Zero(), Vec3::UnitX()}, s);
  REQUIRE(w);
  CHECK(w->enter == 0.0);
  CHECK(w->exit == doctest::Approx(1.5));
  CHECK_FALSE(sphere_prefilter(Ray{Vec3(0, 2, -5), Vec3::UnitZ()}, s));
  w = sphere_prefilter(Ray{Vec3(0, 0, -3), Vec3::UnitZ()}, s);
  REQUIRE(w);
  CHECK(w->enter == doctest::Approx(1.5));
  CHECK(w->exit == doctest::Approx(4.5));
  CHECK_FALSE(sphere_prefilter(Ray{Vec3(0, 0, 3), Vec3::UnitZ()}, s));
}

TEST_CASE("alpha one half halves the remaining distance each step") {
  const AnalyticShape shape = unit_sphere();
  MarchParams p;
  p.alpha = 0.5;
  p.dt_min = 1e-6;
  p.hit_tol = 1e-9;
  p.max_steps = 1000;
  std::vector<double> trace;
  const auto hit = march(AnalyticField{&shape}, Ray{Vec3(0, 0, -3), Vec3::UnitZ()}, p, {0.0, 10.0}, &trace);
  REQUIRE(hit);
  for (size_t k = 0; k < trace.size(); ++k) {
    const double dist = 2.0 - trace[k];
    if (dist < 2.0 * p.dt_min) break;
    CHECK(std::abs(dist - 2.0 * std::pow(0.5, static_cast<double>(k))) < 1e-9);
  }
}

TEST_CASE("ray through the center hits at the closed-form distance") {
  const AnalyticShape shape = unit_sphere();
  MarchParams p;
  const auto hit = march(AnalyticField{&shape}, Ray{Vec3(0, 0, -3), Vec3::UnitZ()}, p, {0.0, 10.0});
  REQUIRE(hit);
  CHECK(std::abs(hit->t - 2.0) <= p.hit_tol + p.dt_min);
  CHECK(hit->steps <= p.max_steps);
}

TEST_CASE("grazing ray terminates near the tangent point") {
  const AnalyticShape shape = unit_sphere();
  MarchParams p;
  p.max_steps = 50;
  const auto hit = march(AnalyticField{&shape}, Ray{Vec3(0, 1, -3), Vec3::UnitZ()}, p, {0.0, 6.0});
  if (hit) {
    CHECK(std::abs(hit->t - 3.0) < 0.02);
    CHECK(hit->steps <= p.max_steps);
  }
  const auto miss = march(AnalyticField{&shape}, Ray{Vec3(0, 1.01, -3), Vec3::UnitZ()}, p, {0.0, 6.0});
  CHECK_FALSE(miss);
}

TEST_CASE("rendered depth is z-depth, not ray length") {
  const AnalyticShape shape = unit_sphere();
  CameraModel c = small_camera(32, 32);
  c.pose.translation() = Vec3(0, 0, -3);
  MarchParams p;
  p.alpha = 1.0;
  p.hit_tol = 1e-9;
  p.dt_min = 1e-9;
  p.max_steps = 1000;
  const auto img = render_field(AnalyticField{&shape}, c, p, BoundingSphere{Vec3::Zero(), 1.01});
  size_t hits = 0;
  for (int y = 0; y < c.height; ++y)
    for (int x = 0; x < c.width; ++x) {
      if (!img.is_hit(static_cast<size_t>(y) * c.width + x)) {
        CHECK(img.variance(x, y) == kMissVariance);
        continue;
      }
      ++hits;
      const Vec3 w = backproject(c, x, y, img.depth(x, y));
      CHECK(std::abs(w.norm() - 1.0) < 1e-7);
    }
  CHECK(hits > 100);
}

TEST_CASE("march parameter validation") {
  MarchParams p;
  p.alpha = 1.5;
  CHECK_THROWS_AS(p.validate(), InputError);
  p = MarchParams{};
  p.dt_min = 0.0;
  CHECK_THROWS_AS(p.validate(), InputError);
  const auto d = MarchParams::defaults_for(2.0);
  CHECK(d.hit_tol == doctest::Approx(2e-4));
  CHECK(d.dt_min == doctest::Approx(2e-3));
}

TEST_CASE("GPIS render of a touched sphere lands near the true surface") {
  const AnalyticShape shape = unit_sphere();
  const auto touches = sample_touches(shape, 150, 0.05, 5, NoiseModel{}, 3);
  ConditioningOptions opt = ConditioningOptions::defaults_for(touches);
  opt.voxel = 0.08;
  KernelParams kp;
  kp.rho = 0.5;
  kp.noise = 1e-6;
  kp.prior_mean = 0.5;
  const auto model = GpisModel::fit(build_conditioning_set(touches, opt), kp);
  CameraModel c = small_camera(24, 24);
  c.pose = look_at(Vec3(0, -3, 0), Vec3::Zero(), Vec3::UnitZ());
  GpisRenderOptions ro;
  ro.march = MarchParams::defaults_for(1.0);
  const auto img = render_depth_variance(model, c, ro);
  const auto gt = render_gt_depth(shape, c);
  size_t both = 0;
  for (size_t i = 0; i < img.depth.size(); ++i) {
    if (img.is_hit(i)) {
      CHECK(img.variance[i] > 0.0);
      CHECK(img.variance[i] < kMissVariance);
    } else {
      CHECK(img.variance[i] == kMissVariance);
    }
    if (img.is_hit(i) && gt.is_hit(i)) {
      ++both;
      CHECK(std::abs(img.depth[i] - gt.depth[i]) < 0.1);
    }
  }
  CHECK(both >= 0.9 * static_cast<double>(gt.hit_count()));
}
