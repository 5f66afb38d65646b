#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace vtf {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Pose = Eigen::Isometry3d;

/// Malformed or out-of-contract input (bad normals, out-of-bounds pixels, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Linear algebra or optimization broke down (non-PD kernel, NaN loss).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration file problems. Messages carry the offending line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A pipeline stage was requested before its upstream artifacts exist.
class DependencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File parsing / writing failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vtf
