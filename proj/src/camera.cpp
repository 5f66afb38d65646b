#include "vtfuse/camera.hpp"

#include <cmath>
#include <string>

namespace vtf {

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InputError("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InputError("camera dimensions must be positive");
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height))
    throw InputError("camera principal point outside the image");
  const Mat3 r = pose.linear();
  const double err = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(err <= 1e-8) || r.determinant() < 0.0)
    throw InputError("camera pose rotation is not orthonormal (error " + std::to_string(err) + ")");
}

Ray generate_ray(const CameraModel& camera, double u, double v) {
  if (!(u >= -0.5 && u < camera.width - 0.5 && v >= -0.5 && v < camera.height - 0.5))
    throw InputError("pixel (" + std::to_string(u) + ", " + std::to_string(v) + ") outside image");
  const Vec3 local((u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0);
  Ray ray;
  ray.origin = camera.pose.translation();
  ray.direction = (camera.pose.linear() * local).normalized();
  return ray;
}

std::optional<PixelProjection> project(const CameraModel& camera, const Vec3& world) {
  const Vec3 p = camera.pose.inverse() * world;
  if (!(p.z() > 0.0)) return std::nullopt;
  return PixelProjection{camera.fx * p.x() / p.z() + camera.cx, camera.fy * p.y() / p.z() + camera.cy, p.z()};
}

Vec3 backproject(const CameraModel& camera, double u, double v, double z_depth) {
  const Vec3 local((u - camera.cx) / camera.fx * z_depth, (v - camera.cy) / camera.fy * z_depth, z_depth);
  return camera.pose * local;
}

Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = z.cross(up);
  if (x.norm() < 1e-12) x = z.unitOrthogonal();
  x.normalize();
  const Vec3 y = z.cross(x);  // image down
  Pose pose = Pose::Identity();
  pose.linear().col(0) = x;
  pose.linear().col(1) = y;
  pose.linear().col(2) = z;
  pose.translation() = eye;
  return pose;
}

}  // namespace vtf
