#pragma once

#include <optional>

#include "vtfuse/types.hpp"

namespace vtf {

/// Pinhole camera. Camera frame: +z forward, +x right, +y down.
/// `pose` maps camera coordinates to world coordinates.
struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  Pose pose = Pose::Identity();

  /// Throws InputError when intrinsics or the pose rotation are invalid.
  void validate() const;

  Vec3 position() const { return pose.translation(); }
  Vec3 optical_axis() const { return pose.linear().col(2); }
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();

  Vec3 at(double t) const { return origin + t * direction; }
};

struct PixelProjection {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;  // camera-frame depth
};

/// Unit-direction ray through continuous pixel coordinates (u, v). Pixel
/// centers sit at integer coordinates; valid range is [-0.5, W-0.5) x [-0.5, H-0.5).
Ray generate_ray(const CameraModel& camera, double u, double v);

/// World point -> pixel. Empty when the point is behind the camera.
std::optional<PixelProjection> project(const CameraModel& camera, const Vec3& world);

/// Lifts a z-depth sample at pixel (u, v) to world coordinates.
Vec3 backproject(const CameraModel& camera, double u, double v, double z_depth);

/// Camera at `eye` looking at `target`, with `up` giving the image "up" hint.
Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

}  // namespace vtf
